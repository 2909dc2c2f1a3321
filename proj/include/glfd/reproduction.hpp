#pragma once

#include <cstddef>
#include <vector>

#include "glfd/cdmp.hpp"
#include "glfd/collision.hpp"
#include "glfd/kinematics.hpp"
#include "glfd/region_planner.hpp"
#include "glfd/taskspace.hpp"

namespace glfd {

/// Orientation gate shared by demo validation and guidance: cos(30 deg).
inline const double kDefaultSimilarityThreshold = std::cos(M_PI / 6.0);

struct JointSample {
  double t = 0.0;
  JointConfig config = JointConfig::Zero();
};

struct JointTrajectory {
  std::vector<JointSample> samples;
};

struct ReproductionParams {
  /// Nearest mapped configurations consulted per sample.
  int k = 4;
  /// Largest accepted per-step joint change (rad), 1.5 * epsilon by default.
  double max_step = 1.5 * kDefaultEpsilon;
  double w_rot = kDefaultRotationWeight;

  static ReproductionParams for_epsilon(double epsilon) {
    ReproductionParams p;
    p.max_step = 1.5 * epsilon;
    return p;
  }
  void validate() const;
};

struct ReproductionReport {
  bool success = false;
  double max_joint_jump = 0.0;
  std::vector<std::size_t> out_of_region_samples;
  std::vector<std::size_t> collision_samples;
  std::vector<std::size_t> unreachable_samples;
};

struct Reproduction {
  JointTrajectory trajectory;
  ReproductionReport report;
};

/// Motion generator: per sample, the IK solution closest (config_distance)
/// to any of the k region configurations whose grid poses are nearest the
/// sample. Ties go to the lowest solution index. Unreachable samples repeat
/// the previous configuration (or the nearest mapped one at the start) so
/// the output keeps one entry per input sample; nothing is repaired.
/// Samples outside the grid cover or whose nearest grid pose is not in the
/// region are listed as out of region.
Reproduction reproduce(const TaskTrajectory& traj, const Region& region, const TaskGrid& grid,
                       const ArmModel& model, const Environment& env, const ReproductionParams& params = {});

/// Per sample: true iff the nearest grid pose among orientations with
/// similarity >= threshold lies in the region. Samples outside the grid
/// cover are false.
std::vector<bool> validate_demo(const TaskTrajectory& traj, const Region& region, const TaskGrid& grid,
                                double similarity_threshold = kDefaultSimilarityThreshold,
                                double w_rot = kDefaultRotationWeight);

}  // namespace glfd
