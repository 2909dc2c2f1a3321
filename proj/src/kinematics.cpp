#include "glfd/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace glfd {

namespace {

constexpr double kDegenerate = 1e-10;
constexpr double kDuplicate = 1e-6;
constexpr double kTwoPi = 2.0 * M_PI;

// acos/asin that tolerate arguments a rounding error outside [-1, 1].
bool safe_acos(double x, double& out) {
  if (x > 1.0 + 1e-12 || x < -1.0 - 1e-12) return false;
  out = std::acos(std::clamp(x, -1.0, 1.0));
  return true;
}

double wrap_pi(double a) {
  a = std::remainder(a, kTwoPi);
  return a;
}

bool same_angle(double a, double b, double tol) {
  return std::abs(a - b) <= tol;
}

}  // namespace

ArmModel ArmModel::ur5() {
  ArmModel m;
  m.name = "ur5";
  m.dh = {{
      {0.0, M_PI / 2, 0.089159, 0.0},
      {-0.425, 0.0, 0.0, 0.0},
      {-0.39225, 0.0, 0.0, 0.0},
      {0.0, M_PI / 2, 0.10915, 0.0},
      {0.0, -M_PI / 2, 0.09465, 0.0},
      {0.0, 0.0, 0.0823, 0.0},
  }};
  for (auto& l : m.limits) l = {-M_PI, M_PI};
  using V = Eigen::Vector3d;
  m.capsules = {
      {0, V(0, 0, 0.065), V(0, 0, 0.09), 0.06},             // base
      {1, V(0, 0, 0.0), V(0, 0, 0.135), 0.06},              // shoulder
      {2, V(0.425, 0, 0.135), V(0, 0, 0.135), 0.055},       // upper arm
      {2, V(0, 0, 0.135), V(0, 0, 0.016), 0.05},            // elbow
      {3, V(0.39225, 0, 0.016), V(0, 0, 0.016), 0.045},     // forearm
      {3, V(0, 0, 0.016), V(0, 0, 0.10915), 0.045},         // wrist 1
      {4, V(0, 0, 0.0), V(0, 0, 0.09465), 0.045},           // wrist 2
      {5, V(0, 0, 0.0), V(0, 0, 0.0823), 0.04},             // wrist 3
      {6, V(0, 0, 0.0), V(0, 0, 0.10), 0.025},              // tool
  };
  for (const auto& c : m.capsules) {
    m.visual.push_back({c.frame, c.p0, c.p1, 0.8 * c.radius});
  }
  double reach = 0.0;
  for (const auto& row : m.dh) reach += std::abs(row.a) + std::abs(row.d);
  m.reach_radius = reach;
  return m;
}

void ArmModel::validate() const {
  for (int j = 0; j < kNumJoints; ++j) {
    if (!(limits[j].lo < limits[j].hi)) {
      throw std::invalid_argument("joint " + std::to_string(j + 1) + ": lower limit must be below upper limit");
    }
  }
  for (const auto& c : capsules) {
    if (c.frame < 0 || c.frame > kNumJoints) throw std::invalid_argument("capsule frame index out of range");
    if (!(c.radius > 0.0)) throw std::invalid_argument("capsule radius must be positive");
  }
  if (!(reach_radius > 0.0)) throw std::invalid_argument("reach_radius must be positive");
}

Eigen::Isometry3d dh_transform(const DHRow& row, double joint_angle) {
  const double th = joint_angle + row.theta_offset;
  const double ct = std::cos(th), st = std::sin(th);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Eigen::Matrix4d m;
  m << ct, -st * ca, st * sa, row.a * ct,
       st, ct * ca, -ct * sa, row.a * st,
       0.0, sa, ca, row.d,
       0.0, 0.0, 0.0, 1.0;
  Eigen::Isometry3d T;
  T.matrix() = m;
  return T;
}

std::array<Eigen::Isometry3d, kNumJoints + 1> link_frames(const ArmModel& model,
                                                          const JointConfig& config) {
  std::array<Eigen::Isometry3d, kNumJoints + 1> frames;
  frames[0] = model.base.to_isometry();
  for (int j = 0; j < kNumJoints; ++j) {
    frames[j + 1] = frames[j] * dh_transform(model.dh[j], config[j]);
  }
  return frames;
}

Pose forward_kinematics(const ArmModel& model, const JointConfig& config) {
  return Pose::from_isometry(link_frames(model, config)[kNumJoints]);
}

Eigen::Matrix<double, 6, 6> jacobian(const ArmModel& model, const JointConfig& config) {
  const auto frames = link_frames(model, config);
  const Eigen::Vector3d tip = frames[kNumJoints].translation();
  Eigen::Matrix<double, 6, 6> J;
  for (int j = 0; j < kNumJoints; ++j) {
    // joint j rotates about the z axis of frame j
    const Eigen::Vector3d z = frames[j].linear().col(2);
    const Eigen::Vector3d o = frames[j].translation();
    J.block<3, 1>(0, j) = z.cross(tip - o);
    J.block<3, 1>(3, j) = z;
  }
  return J;
}

double singularity_margin(const ArmModel& model, const JointConfig& config) {
  Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(jacobian(model, config));
  return svd.singularValues()(kNumJoints - 1);
}

namespace {

void require_ur_class(const ArmModel& m) {
  const auto& d = m.dh;
  auto near = [](double x, double y) { return std::abs(x - y) < 1e-12; };
  const bool ok = near(d[0].a, 0) && near(d[0].alpha, M_PI / 2) &&
                  near(d[1].alpha, 0) && near(d[1].d, 0) &&
                  near(d[2].alpha, 0) && near(d[2].d, 0) &&
                  near(d[3].a, 0) && near(d[3].alpha, M_PI / 2) &&
                  near(d[4].a, 0) && near(d[4].alpha, -M_PI / 2) &&
                  near(d[5].a, 0) && near(d[5].alpha, 0) &&
                  std::abs(d[1].a) > 1e-9 && std::abs(d[2].a) > 1e-9 && std::abs(d[5].d) > 1e-9;
  if (!ok) throw std::invalid_argument("analytic_ik: DH table is not of the UR class");
}

// Appends every 2*pi representative of the DH-angle solution that lies inside
// the joint limits.
void expand_into_limits(const ArmModel& model, const std::array<double, kNumJoints>& theta,
                        std::vector<JointConfig>& out) {
  std::array<std::vector<double>, kNumJoints> choices;
  for (int j = 0; j < kNumJoints; ++j) {
    const double base = wrap_pi(theta[j] - model.dh[j].theta_offset);
    const auto [lo, hi] = model.limits[j];
    const double kmin = std::ceil((lo - base) / kTwoPi - 1e-12);
    const double kmax = std::floor((hi - base) / kTwoPi + 1e-12);
    for (double k = kmin; k <= kmax; k += 1.0) {
      choices[j].push_back(std::clamp(base + k * kTwoPi, lo, hi));
    }
    if (choices[j].empty()) return;
  }
  std::array<std::size_t, kNumJoints> idx{};
  while (true) {
    JointConfig q;
    for (int j = 0; j < kNumJoints; ++j) q[j] = choices[j][idx[j]];
    out.push_back(q);
    int j = kNumJoints - 1;
    while (j >= 0 && ++idx[j] == choices[j].size()) {
      idx[j] = 0;
      --j;
    }
    if (j < 0) break;
  }
}

}  // namespace

std::vector<JointConfig> analytic_ik(const ArmModel& model, const Pose& target) {
  require_ur_class(model);
  const auto& dh = model.dh;
  const double a2 = dh[1].a, a3 = dh[2].a;
  const double d4 = dh[3].d, d6 = dh[5].d;

  // Target flange pose in the DH base frame.
  const Eigen::Isometry3d T06 = model.base.to_isometry().inverse() * target.to_isometry();
  const Eigen::Vector3d p06 = T06.translation();
  const Eigen::Matrix3d R06 = T06.linear();
  const Eigen::Vector3d p05 = p06 - d6 * R06.col(2);

  std::vector<JointConfig> raw;

  // The wrist center lies at distance d4 from the plane of the middle links:
  // p05 . z1 = d4 with z1 = (sin t1, -cos t1, 0).
  const double r = std::hypot(p05.x(), p05.y());
  if (r < std::abs(d4) || r < kDegenerate) return {};
  const double phi = std::atan2(p05.y(), p05.x());
  const double psi = std::asin(std::clamp(d4 / r, -1.0, 1.0));
  const std::array<double, 2> t1s = {phi + psi, phi + M_PI - psi};

  for (double t1 : t1s) {
    const Eigen::Vector3d z1(std::sin(t1), -std::cos(t1), 0.0);
    double acos5 = 0.0;
    if (!safe_acos((p06.dot(z1) - d4) / d6, acos5)) continue;
    for (double t5 : {acos5, -acos5}) {
      const double s5 = std::sin(t5);
      if (std::abs(s5) < kDegenerate) continue;
      // z1 seen from the flange frame is (c6 s5, -s6 s5, c5).
      const Eigen::Vector3d v = R06.transpose() * z1;
      const double t6 = std::atan2(-v.y() / s5, v.x() / s5);

      const Eigen::Isometry3d T14 = dh_transform(dh[0], t1 - dh[0].theta_offset).inverse() * T06 *
                                    dh_transform(dh[5], t6 - dh[5].theta_offset).inverse() *
                                    dh_transform(dh[4], t5 - dh[4].theta_offset).inverse();
      const double x = T14.translation().x();
      const double y = T14.translation().y();
      const double rr = x * x + y * y;
      if (rr < kDegenerate) continue;
      double acos3 = 0.0;
      if (!safe_acos((rr - a2 * a2 - a3 * a3) / (2.0 * a2 * a3), acos3)) continue;
      for (double t3 : {acos3, -acos3}) {
        const double s3 = std::sin(t3);
        if (std::abs(s3) < kDegenerate) continue;  // elbow stretched or folded
        const double t2 = std::atan2(y, x) - std::atan2(a3 * s3, a2 + a3 * std::cos(t3));
        const double t234 = std::atan2(T14.linear()(1, 0), T14.linear()(0, 0));
        const double t4 = t234 - t2 - t3;
        expand_into_limits(model, {t1, t2, t3, t4, t5, t6}, raw);
      }
    }
  }

  std::vector<JointConfig> out;
  for (const auto& q : raw) {
    const Pose fk = forward_kinematics(model, q);
    if ((fk.position - target.position).norm() > 1e-6 ||
        angular_distance(fk.orientation, target.orientation) > 1e-6) {
      continue;
    }
    const bool dup = std::any_of(out.begin(), out.end(), [&](const JointConfig& o) {
      for (int j = 0; j < kNumJoints; ++j) {
        if (!same_angle(o[j], q[j], kDuplicate)) return false;
      }
      return true;
    });
    if (!dup) out.push_back(q);
  }
  return out;
}

double config_distance(const JointConfig& a, const JointConfig& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

double config_distance(const JointConfig& a, const JointConfig& b, const ConfigMetric& metric) {
  if (metric.kind == ConfigMetric::Kind::chebyshev) return config_distance(a, b);
  return std::sqrt(((a - b).array().square() * metric.weights.array()).sum());
}

bool within_limits(const ArmModel& model, const JointConfig& config) {
  for (int j = 0; j < kNumJoints; ++j) {
    if (!(config[j] >= model.limits[j].lo && config[j] <= model.limits[j].hi)) return false;
  }
  return true;
}

}  // namespace glfd
