#pragma once

#include <Eigen/Geometry>

namespace glfd {

/// Position in meters plus unit quaternion. q and -q describe the same
/// orientation; compare through angular_distance(), never componentwise.
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Pose() = default;
  Pose(const Eigen::Vector3d& p, const Eigen::Quaterniond& q)
      : position(p), orientation(q.normalized()) {}

  static Pose from_isometry(const Eigen::Isometry3d& T);
  Eigen::Isometry3d to_isometry() const;

  /// Tool approach axis (local z) expressed in the world frame.
  Eigen::Vector3d forward_axis() const {
    return orientation * Eigen::Vector3d::UnitZ();
  }
};

/// Rotation angle between two orientations in [0, pi], sign invariant.
double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

inline double position_distance(const Pose& a, const Pose& b) {
  return (a.position - b.position).norm();
}

/// Rotation of `angle` radians about a world-frame axis.
Eigen::Quaterniond axis_angle(const Eigen::Vector3d& axis, double angle);

}  // namespace glfd
