#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "glfd/pose.hpp"

namespace glfd {

struct TrajectorySample {
  double t = 0.0;
  Pose pose;
};

/// Timestamped pose sequence: t[0] == 0, strictly increasing, quaternions
/// sign-continuous.
struct TaskTrajectory {
  std::vector<TrajectorySample> samples;

  double duration() const { return samples.empty() ? 0.0 : samples.back().t; }
  /// Throws std::invalid_argument on fewer than two samples, t[0] != 0 or
  /// non-increasing timestamps.
  void validate() const;
};

/// Flips quaternion signs so consecutive samples have a non-negative dot
/// product. The first sample keeps its sign.
void make_sign_continuous(TaskTrajectory& traj);

struct CDMPParams {
  int n_kernels = 30;
  double alpha = 48.0;
  double beta = 12.0;
  double alpha_s = 4.0;

  /// Throws std::invalid_argument unless n_kernels >= 2, gains positive and
  /// alpha == 4 * beta.
  void validate() const;
};

/// Position and orientation transformation systems sharing one canonical
/// phase s, with s' = -alpha_s s / tau:
///   tau^2 p'' = alpha (beta (g - p) - tau p') + f_p(s)
///   tau^2 e'' = alpha (-beta e - tau e') + f_q(s),  e = log(q * conj(g))
/// and f(s) = s * sum(psi_i w_i) / sum(psi_i). Kernel centers are uniform in
/// time over [0, tau] (c_i = exp(-alpha_s i / (N - 1))); uniform spacing in s
/// leaves the end of the motion with too few kernels.
struct CDMPModel {
  int n_kernels = 0;
  Eigen::Matrix3Xd position_weights;
  Eigen::Matrix3Xd orientation_weights;
  double tau = 1.0;
  double alpha = 48.0;
  double beta = 12.0;
  double alpha_s = 4.0;
  Pose start_pose;
  Pose goal_pose;

  Eigen::VectorXd centers() const;
  Eigen::VectorXd widths() const;
  /// Forcing term for one channel at phase s.
  Eigen::Vector3d forcing(const Eigen::Matrix3Xd& weights, double s) const;

  void validate() const;
};

/// Fits both forcing terms by linear least squares over the normalized kernel
/// basis, against target forces from finite-difference derivatives of the
/// demo. Throws std::invalid_argument for an invalid demo.
CDMPModel train(const TaskTrajectory& demo, const CDMPParams& params = {});
CDMPModel train(const TaskTrajectory& demo, int n_kernels);

/// Integrates from `start` toward `goal` with time constant tau_prime and
/// returns round(1.2 tau_prime / dt) samples at t = i * dt, covering
/// [0, 1.2 tau_prime). Fixed-step RK4, internally sub-stepped to at most
/// tau_prime / 1000. Requires tau_prime > 0 and 0 < dt <= tau_prime / 10.
TaskTrajectory rollout(const CDMPModel& model, const Pose& start, const Pose& goal, double tau_prime,
                       double dt);

/// Principal logarithm with the half-angle convention: |log q| is half the
/// rotation angle, so exp(log(q)) == q (not -q). For q = -1 the axis is
/// undefined and (pi, 0, 0) is returned.
Eigen::Vector3d quat_log(const Eigen::Quaterniond& q);
Eigen::Quaterniond quat_exp(const Eigen::Vector3d& v);

}  // namespace glfd
