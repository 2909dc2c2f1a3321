#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "glfd/collision.hpp"
#include "glfd/kinematics.hpp"
#include "glfd/region_planner.hpp"
#include "glfd/reproduction.hpp"
#include "glfd/taskspace.hpp"

namespace glfd {

/// Why a pose outside the region cannot be used.
enum class VoxelClass : std::uint8_t { collision_all_ik, large_config_change, unreachable };

const char* to_string(VoxelClass c);
/// Throws std::invalid_argument for an unknown name.
VoxelClass voxel_class_from_string(const std::string& name);

struct ToolPose {
  Pose pose;
  double timestamp = 0.0;
};

struct GuidanceParams {
  double similarity_threshold = kDefaultSimilarityThreshold;
  /// Voxels within this distance of the tool are fully opaque; opacity falls
  /// linearly to 0.25 at three times the distance.
  double opacity_near_distance = 0.15;
  /// Radius of the vertical column above the tool that is never drawn.
  double overhead_clear_radius = 0.08;

  void validate() const;
};

struct BlockedVoxel {
  PoseIndex pose_index = 0;
  VoxelClass cls = VoxelClass::unreachable;
  double opacity = 1.0;

  bool operator==(const BlockedVoxel&) const = default;
};

struct GuidanceFrame {
  /// Ascending pose_index.
  std::vector<BlockedVoxel> blocked;
  ToolPose tool;
  std::uint64_t region_revision = 0;
};

struct FrameDiff {
  std::uint64_t region_revision = 0;
  ToolPose tool;
  std::vector<BlockedVoxel> added;
  std::vector<PoseIndex> removed;
  std::vector<std::pair<PoseIndex, double>> changed_opacity;

  bool empty() const { return added.empty() && removed.empty() && changed_opacity.empty(); }
};

/// Classification of one pose against a fixed environment (the region is
/// only used to reject members). Throws std::invalid_argument for a region
/// member.
VoxelClass classify_voxel(PoseIndex pose, const TaskGrid& grid, const ArmModel& model, const Environment& env,
                          const Region& region);

/// Lazily filled classification cache for one environment snapshot. Lookups
/// from several threads are safe; a race only repeats the same computation.
class VoxelClassifier {
 public:
  VoxelClassifier(const ArmModel& model, const TaskGrid& grid, Environment env);

  /// Does not check region membership.
  VoxelClass classify(PoseIndex pose) const;
  std::uint64_t env_revision() const { return env_.revision(); }
  /// Classifies every pose outside `region` up front.
  void warm(const Region& region) const;

 private:
  const ArmModel* model_;
  const TaskGrid* grid_;
  Environment env_;
  std::unique_ptr<std::atomic<std::uint8_t>[]> cache_;
};

/// Blocked voxels for a tool pose: grid poses outside the region whose
/// orientation similarity to the tool reaches the threshold, except those in
/// the column strictly above the tool. region_revision echoes the region's
/// env_revision.
GuidanceFrame blocked_voxels(const TaskGrid& grid, const Region& region, const ToolPose& tool,
                             const GuidanceParams& params, const VoxelClassifier& classifier);
GuidanceFrame blocked_voxels(const TaskGrid& grid, const Region& region, const ToolPose& tool,
                             const GuidanceParams& params, const ArmModel& model, const Environment& env);

double voxel_opacity(double distance, double near_distance);

/// Throws std::invalid_argument when the frames carry different revisions.
FrameDiff frame_diff(const GuidanceFrame& prev, const GuidanceFrame& next);
/// Throws std::invalid_argument on a revision mismatch.
GuidanceFrame apply_diff(const GuidanceFrame& prev, const FrameDiff& diff);

}  // namespace glfd
