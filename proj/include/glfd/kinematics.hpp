#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "glfd/pose.hpp"

namespace glfd {

constexpr int kNumJoints = 6;

using JointConfig = Eigen::Matrix<double, kNumJoints, 1>;

/// Standard (distal) Denavit-Hartenberg row: Rz(theta) Tz(d) Tx(a) Rx(alpha),
/// with theta = joint angle + theta_offset.
struct DHRow {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

struct JointLimit {
  double lo = -M_PI;
  double hi = M_PI;
};

/// Segment with radius rigidly attached to a link frame. Frame 0 is the arm
/// base, frame i (1..6) the DH frame after joint i, frame 6 the flange.
struct LinkCapsule {
  int frame = 0;
  Eigen::Vector3d p0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d p1 = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

struct ArmModel {
  std::string name;
  std::array<DHRow, kNumJoints> dh{};
  std::array<JointLimit, kNumJoints> limits{};
  /// Collision geometry.
  std::vector<LinkCapsule> capsules;
  /// Declared visual link geometry (cylinders); the capsules must enclose it.
  std::vector<LinkCapsule> visual;
  Pose base;
  /// Upper bound on flange distance from the base origin.
  double reach_radius = 0.0;

  /// UR5-class default shipped as data/ur5.json.
  static ArmModel ur5();

  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

/// Metric on configurations. Chebyshev (largest single joint change) is the
/// default; weighted L2 is available for experiments.
struct ConfigMetric {
  enum class Kind { chebyshev, weighted_l2 };
  Kind kind = Kind::chebyshev;
  JointConfig weights = JointConfig::Ones();
};

Eigen::Isometry3d dh_transform(const DHRow& row, double joint_angle);

/// World poses of frames 0..6 (base, then one per joint).
std::array<Eigen::Isometry3d, kNumJoints + 1> link_frames(const ArmModel& model,
                                                          const JointConfig& config);

Pose forward_kinematics(const ArmModel& model, const JointConfig& config);

/// Geometric Jacobian (rows: linear velocity, angular velocity) of the flange
/// expressed in the world frame.
Eigen::Matrix<double, 6, 6> jacobian(const ArmModel& model, const JointConfig& config);

/// Smallest singular value of the Jacobian; zero at kinematic singularities.
double singularity_margin(const ArmModel& model, const JointConfig& config);

/// All distinct closed-form solutions for a UR-class arm (spherical-offset
/// wrist, three parallel middle axes), up to 8 branches. Solutions outside the
/// joint limits are dropped; every 2*pi representative inside the limits is
/// kept. Degenerate branches (wrist or elbow singular) are skipped.
/// Throws std::invalid_argument if the DH table is not of that class.
std::vector<JointConfig> analytic_ik(const ArmModel& model, const Pose& target);

/// Chebyshev distance max_j |a_j - b_j|; angles are not wrapped.
double config_distance(const JointConfig& a, const JointConfig& b);
double config_distance(const JointConfig& a, const JointConfig& b, const ConfigMetric& metric);

/// Closed interval check against the model's joint limits.
bool within_limits(const ArmModel& model, const JointConfig& config);

}  // namespace glfd
