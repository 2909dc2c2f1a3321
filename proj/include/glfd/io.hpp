#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "glfd/cdmp.hpp"
#include "glfd/collision.hpp"
#include "glfd/guidance.hpp"
#include "glfd/kinematics.hpp"
#include "glfd/region_planner.hpp"
#include "glfd/reproduction.hpp"
#include "glfd/taskspace.hpp"

namespace glfd {

using json = nlohmann::json;

/// Parse failures of any document below surface as std::invalid_argument
/// with the offending field in the message.

json vec_to_json(const Eigen::Vector3d& v);
Eigen::Vector3d vec_from_json(const json& j);
/// (w, x, y, z)
json quat_to_json(const Eigen::Quaterniond& q);
Eigen::Quaterniond quat_from_json(const json& j);
json pose_to_json(const Pose& p);
Pose pose_from_json(const json& j);
json config_to_json(const JointConfig& c);
JointConfig config_from_json(const json& j);

json to_json(const ArmModel& m);
ArmModel arm_model_from_json(const json& j);

json to_json(const Shape& s);
Shape shape_from_json(const json& j);
json to_json(const Environment& env);
Environment environment_from_json(const json& j);

/// Offsets may be given as quaternions or as {"axis": [..], "angle_deg": a}.
json to_json(const GridSpec& g);
GridSpec grid_spec_from_json(const json& j);

json to_json(const TaskTrajectory& t);
TaskTrajectory trajectory_from_json(const json& j);
json to_json(const CDMPModel& m);
CDMPModel cdmp_model_from_json(const json& j);

json to_json(const ReproductionReport& r);
ReproductionReport report_from_json(const json& j);
json to_json(const JointTrajectory& t, const ReproductionReport& r);

json to_json(const GuidanceFrame& f);
GuidanceFrame guidance_frame_from_json(const json& j);
json to_json(const FrameDiff& d);
FrameDiff frame_diff_from_json(const json& j);

/// Arm model, grid and graph that live together; the graph points into the
/// grid, so the grid is heap-allocated and the bundle is move-only.
struct Workspace {
  ArmModel model;
  GridSpec spec;
  std::unique_ptr<TaskGrid> grid;
  TaskGraph graph;

  static Workspace build(ArmModel model, GridSpec spec);
  std::uint64_t hash() const { return graph_hash(*grid, spec.ball_radius); }
};

/// Region file: the mapping plus everything needed to use it stand-alone
/// (arm model, grid spec, environment it was built against).
json region_file_json(const Region& region, const Workspace& ws, const Environment& env);

struct RegionFile {
  Workspace workspace;
  Environment env;
  Region region;
};
/// Rebuilds the grid and rejects the file if its graph hash does not match.
RegionFile region_file_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
/// Two-space indented dump plus trailing newline; byte-stable for equal
/// values.
void write_json_file(const std::filesystem::path& path, const json& j);
std::string hash_to_hex(std::uint64_t h);

}  // namespace glfd
