#include "glfd/cdmp.hpp"

#include <cmath>
#include <stdexcept>

namespace glfd {

namespace {

using Eigen::Vector3d;

// Second-order interior / first-order edge finite differences on a
// non-uniform time grid (as numpy.gradient).
std::vector<Vector3d> gradient(const std::vector<Vector3d>& y, const std::vector<double>& t) {
  const std::size_t n = y.size();
  std::vector<Vector3d> g(n);
  g[0] = (y[1] - y[0]) / (t[1] - t[0]);
  g[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
    g[i] = (h0 * h0 * y[i + 1] + (h1 * h1 - h0 * h0) * y[i] - h1 * h1 * y[i - 1]) / (h0 * h1 * (h0 + h1));
  }
  return g;
}

Eigen::Quaterniond same_hemisphere(const Eigen::Quaterniond& q, const Eigen::Quaterniond& ref) {
  return q.dot(ref) < 0.0 ? Eigen::Quaterniond(-q.coeffs()) : q;
}

}  // namespace

void TaskTrajectory::validate() const {
  if (samples.size() < 2) throw std::invalid_argument("trajectory needs at least two samples");
  if (samples.front().t != 0.0) throw std::invalid_argument("trajectory must start at t = 0");
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t > samples[i - 1].t)) throw std::invalid_argument("trajectory timestamps must strictly increase");
  }
}

void make_sign_continuous(TaskTrajectory& traj) {
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    auto& q = traj.samples[i].pose.orientation;
    q = same_hemisphere(q, traj.samples[i - 1].pose.orientation);
  }
}

void CDMPParams::validate() const {
  if (n_kernels < 2) throw std::invalid_argument("n_kernels must be at least 2");
  if (!(alpha > 0.0 && beta > 0.0 && alpha_s > 0.0)) throw std::invalid_argument("CDMP gains must be positive");
  if (alpha != 4.0 * beta) throw std::invalid_argument("alpha must equal 4 * beta (critical damping)");
}

Eigen::VectorXd CDMPModel::centers() const {
  Eigen::VectorXd c(n_kernels);
  for (int k = 0; k < n_kernels; ++k) c[k] = std::exp(-alpha_s * k / (n_kernels - 1));
  return c;
}

Eigen::VectorXd CDMPModel::widths() const {
  const Eigen::VectorXd c = centers();
  Eigen::VectorXd h(n_kernels);
  for (int k = 0; k + 1 < n_kernels; ++k) h[k] = 1.0 / ((c[k + 1] - c[k]) * (c[k + 1] - c[k]));
  h[n_kernels - 1] = h[n_kernels - 2];
  return h;
}

Eigen::Vector3d CDMPModel::forcing(const Eigen::Matrix3Xd& weights, double s) const {
  const Eigen::VectorXd c = centers(), h = widths();
  const Eigen::VectorXd psi = (-(h.array() * (s - c.array()).square())).exp();
  const double sum = psi.sum();
  if (sum < 1e-300) return Vector3d::Zero();
  return weights * psi * (s / sum);
}

void CDMPModel::validate() const {
  CDMPParams{n_kernels, alpha, beta, alpha_s}.validate();
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (position_weights.cols() != n_kernels || orientation_weights.cols() != n_kernels) {
    throw std::invalid_argument("weight matrices must have n_kernels columns");
  }
}

CDMPModel train(const TaskTrajectory& demo_in, int n_kernels) {
  CDMPParams params;
  params.n_kernels = n_kernels;
  return train(demo_in, params);
}

CDMPModel train(const TaskTrajectory& demo_in, const CDMPParams& params) {
  params.validate();
  demo_in.validate();
  TaskTrajectory demo = demo_in;
  make_sign_continuous(demo);

  CDMPModel m;
  m.n_kernels = params.n_kernels;
  m.alpha = params.alpha;
  m.beta = params.beta;
  m.alpha_s = params.alpha_s;
  m.tau = demo.duration();
  m.start_pose = demo.samples.front().pose;
  m.goal_pose = demo.samples.back().pose;

  const std::size_t n = demo.samples.size();
  const Vector3d g = m.goal_pose.position;
  const Eigen::Quaterniond gq = m.goal_pose.orientation;
  std::vector<double> t(n), s(n);
  std::vector<Vector3d> p(n), e(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = demo.samples[i].t;
    s[i] = std::exp(-m.alpha_s * t[i] / m.tau);
    p[i] = demo.samples[i].pose.position;
    e[i] = quat_log(demo.samples[i].pose.orientation * gq.conjugate());
  }
  const auto v = gradient(p, t), a = gradient(v, t);
  const auto ev = gradient(e, t), ea = gradient(ev, t);

  const double tau2 = m.tau * m.tau;
  std::vector<Vector3d> fp(n), fq(n);
  for (std::size_t i = 0; i < n; ++i) {
    fp[i] = tau2 * a[i] - m.alpha * (m.beta * (g - p[i]) - m.tau * v[i]);
    fq[i] = tau2 * ea[i] - m.alpha * (-m.beta * e[i] - m.tau * ev[i]);
  }

  // Least squares over the normalized basis s * psi_k / sum(psi).
  const Eigen::VectorXd c = m.centers(), h = m.widths();
  Eigen::MatrixXd phi(n, m.n_kernels);
  Eigen::MatrixXd rhs(n, 6);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd psi = (-(h.array() * (s[i] - c.array()).square())).exp();
    phi.row(i) = psi.transpose() * (s[i] / psi.sum());
    rhs.row(i).head<3>() = fp[i].transpose();
    rhs.row(i).tail<3>() = fq[i].transpose();
  }
  const Eigen::MatrixXd w = phi.colPivHouseholderQr().solve(rhs);
  m.position_weights = w.leftCols<3>().transpose();
  m.orientation_weights = w.rightCols<3>().transpose();
  return m;
}

TaskTrajectory rollout(const CDMPModel& model, const Pose& start, const Pose& goal, double tau_prime,
                       double dt) {
  model.validate();
  if (!(tau_prime > 0.0)) throw std::invalid_argument("tau_prime must be positive");
  if (!(dt > 0.0) || dt > tau_prime / 10.0) throw std::invalid_argument("dt must lie in (0, tau_prime / 10]");

  const Eigen::Quaterniond gq = same_hemisphere(goal.orientation, start.orientation);
  const Vector3d g = goal.position;

  // x = [s, p, z = tau p', e, ze = tau e']
  using State = Eigen::Matrix<double, 13, 1>;
  auto deriv = [&](const State& x) {
    State d;
    const double sv = x[0];
    const Vector3d p = x.segment<3>(1), z = x.segment<3>(4), e = x.segment<3>(7), ze = x.segment<3>(10);
    d[0] = -model.alpha_s * sv;
    d.segment<3>(1) = z;
    d.segment<3>(4) = model.alpha * (model.beta * (g - p) - z) + model.forcing(model.position_weights, sv);
    d.segment<3>(7) = ze;
    d.segment<3>(10) = model.alpha * (-model.beta * e - ze) + model.forcing(model.orientation_weights, sv);
    return State(d / tau_prime);
  };

  State x = State::Zero();
  x[0] = 1.0;
  x.segment<3>(1) = start.position;
  x.segment<3>(7) = quat_log(start.orientation * gq.conjugate());

  const long count = std::lround(1.2 * tau_prime / dt);
  const int sub = std::max(1, static_cast<int>(std::ceil(dt * 1000.0 / tau_prime)));
  const double h = dt / sub;

  TaskTrajectory out;
  out.samples.reserve(count);
  for (long i = 0; i < count; ++i) {
    const Eigen::Quaterniond q = (quat_exp(x.segment<3>(7)) * gq).normalized();
    out.samples.push_back({i * dt, Pose(x.segment<3>(1), q)});
    if (i + 1 == count) break;
    for (int k = 0; k < sub; ++k) {
      const State k1 = deriv(x);
      const State k2 = deriv(x + 0.5 * h * k1);
      const State k3 = deriv(x + 0.5 * h * k2);
      const State k4 = deriv(x + h * k3);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  make_sign_continuous(out);
  return out;
}

Eigen::Vector3d quat_log(const Eigen::Quaterniond& q) {
  const Vector3d v = q.vec();
  const double n = v.norm();
  if (n < 1e-12) {
    if (q.w() >= 0.0) return v / q.w();  // first-order, exact in the limit
    return Vector3d(M_PI, 0.0, 0.0);
  }
  return std::atan2(n, q.w()) / n * v;
}

Eigen::Quaterniond quat_exp(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (n < 1e-12) return Eigen::Quaterniond(1.0, v.x(), v.y(), v.z()).normalized();
  const Vector3d u = std::sin(n) / n * v;
  return Eigen::Quaterniond(std::cos(n), u.x(), u.y(), u.z());
}

}  // namespace glfd
