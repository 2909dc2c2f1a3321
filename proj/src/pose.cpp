#include "glfd/pose.hpp"

#include <algorithm>
#include <cmath>

namespace glfd {

Pose Pose::from_isometry(const Eigen::Isometry3d& T) {
  return Pose(T.translation(), Eigen::Quaterniond(T.rotation()));
}

Eigen::Isometry3d Pose::to_isometry() const {
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = orientation.toRotationMatrix();
  T.translation() = position;
  return T;
}

double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const double dot = std::abs(a.normalized().dot(b.normalized()));
  // 2*acos loses precision near 1; the atan2 form stays accurate for tiny angles.
  const Eigen::Quaterniond d = a.normalized().conjugate() * b.normalized();
  const double s = d.vec().norm();
  return 2.0 * std::atan2(s, std::min(dot, 1.0));
}

Eigen::Quaterniond axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized()));
}

}  // namespace glfd
