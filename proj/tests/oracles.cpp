#include "oracles.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace oracle {

using Eigen::Matrix4d;
using Eigen::Vector3d;

std::string data_path(const std::string& name) { return std::string(GLFD_DATA_DIR) + "/" + name; }

namespace {

Matrix4d dh_matrix(double a, double alpha, double d, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta), ca = std::cos(alpha), sa = std::sin(alpha);
  Matrix4d M;
  M << ct, -st * ca, st * sa, a * ct,
       st, ct * ca, -ct * sa, a * st,
       0, sa, ca, d,
       0, 0, 0, 1;
  return M;
}

std::array<Matrix4d, 7> chain(const glfd::ArmModel& m, const JointConfig& q) {
  std::array<Matrix4d, 7> F;
  F[0] = m.base.to_isometry().matrix();
  for (int j = 0; j < 6; ++j) {
    const auto& r = m.dh[j];
    F[j + 1] = F[j] * dh_matrix(r.a, r.alpha, r.d, q[j] + r.theta_offset);
  }
  return F;
}

double seg_point(const Vector3d& a, const Vector3d& b, const Vector3d& p) {
  const Vector3d ab = b - a;
  const double L2 = ab.squaredNorm();
  double t = L2 > 0 ? (p - a).dot(ab) / L2 : 0.0;
  t = t < 0 ? 0 : (t > 1 ? 1 : t);
  return (a + t * ab - p).norm();
}

Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector3d v(n(rng), n(rng), n(rng));
  return v.normalized();
}

}  // namespace

Matrix4d fk_matrix(const glfd::ArmModel& m, const JointConfig& q) { return chain(m, q)[6]; }

std::vector<JointConfig> numeric_ik(const glfd::ArmModel& m, const glfd::Pose& target, int restarts,
                                    std::mt19937_64& rng, double cluster_tol) {
  const Eigen::Matrix3d Rt = target.orientation.toRotationMatrix();
  std::vector<JointConfig> found;
  for (int r = 0; r < restarts; ++r) {
    JointConfig q = random_config(m, rng);
    bool ok = false;
    for (int it = 0; it < 200; ++it) {
      const auto F = chain(m, q);
      const Vector3d tip = F[6].block<3, 1>(0, 3);
      const Eigen::Matrix3d R = F[6].block<3, 3>(0, 0);
      Eigen::Matrix<double, 6, 1> e;
      e.head<3>() = target.position - tip;
      const Eigen::AngleAxisd aa(Rt * R.transpose());
      e.tail<3>() = aa.angle() * aa.axis();
      if (e.norm() < 1e-12) {
        ok = true;
        break;
      }
      Eigen::Matrix<double, 6, 6> J;
      for (int j = 0; j < 6; ++j) {
        const Vector3d z = F[j].block<3, 1>(0, 2), o = F[j].block<3, 1>(0, 3);
        J.block<3, 1>(0, j) = z.cross(tip - o);
        J.block<3, 1>(3, j) = z;
      }
      const double lambda = e.norm() > 1e-4 ? 1e-2 : 1e-8;
      const Eigen::Matrix<double, 6, 6> A = J * J.transpose() + lambda * lambda * Eigen::Matrix<double, 6, 6>::Identity();
      q += J.transpose() * A.ldlt().solve(e);
    }
    if (!ok) continue;
    for (int j = 0; j < 6; ++j) q[j] = std::remainder(q[j], 2 * M_PI);
    if (!glfd::within_limits(m, q)) continue;
    bool dup = false;
    for (const auto& f : found) {
      if ((f - q).cwiseAbs().maxCoeff() < cluster_tol) dup = true;
    }
    if (!dup) found.push_back(q);
  }
  return found;
}

JointConfig random_config(const glfd::ArmModel& m, std::mt19937_64& rng) {
  JointConfig q;
  for (int j = 0; j < 6; ++j) q[j] = std::uniform_real_distribution<double>(m.limits[j].lo, m.limits[j].hi)(rng);
  return q;
}

Eigen::Quaterniond random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized();
}

bool point_inside(const glfd::Shape& s, const Vector3d& p) {
  if (auto* sp = std::get_if<glfd::Sphere>(&s)) return (p - sp->center).norm() <= sp->radius;
  if (auto* c = std::get_if<glfd::Capsule>(&s)) return seg_point(c->a, c->b, p) <= c->radius;
  const auto& b = std::get<glfd::Box>(s);
  const Vector3d l = b.pose.orientation.conjugate() * (p - b.pose.position);
  return std::abs(l.x()) <= b.half_extents.x() && std::abs(l.y()) <= b.half_extents.y() &&
         std::abs(l.z()) <= b.half_extents.z();
}

std::vector<Vector3d> surface_samples(const glfd::Shape& s, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vector3d> out;
  out.reserve(n);
  if (auto* sp = std::get_if<glfd::Sphere>(&s)) {
    for (int i = 0; i < n; ++i) out.push_back(sp->center + sp->radius * random_unit(rng));
  } else if (auto* c = std::get_if<glfd::Capsule>(&s)) {
    const Vector3d axis = c->b - c->a;
    const double L = axis.norm(), r = c->radius;
    const Vector3d ax = L > 0 ? Vector3d(axis / L) : Vector3d::UnitZ();
    const Vector3d e1 = ax.unitOrthogonal(), e2 = ax.cross(e1);
    const double side = 2 * M_PI * r * L, caps = 4 * M_PI * r * r;
    for (int i = 0; i < n; ++i) {
      if (u(rng) * (side + caps) < side) {
        const double phi = 2 * M_PI * u(rng);
        out.push_back(c->a + u(rng) * axis + r * (std::cos(phi) * e1 + std::sin(phi) * e2));
      } else {
        Vector3d d = random_unit(rng);
        const bool at_a = u(rng) < 0.5;
        const Vector3d outward = at_a ? Vector3d(-ax) : ax;
        if (d.dot(outward) < 0) d = -d;
        out.push_back((at_a ? c->a : c->b) + r * d);
      }
    }
  } else {
    const auto& b = std::get<glfd::Box>(s);
    const Vector3d h = b.half_extents;
    const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
    const double total = areas[0] + areas[1] + areas[2];
    for (int i = 0; i < n; ++i) {
      double pick = u(rng) * total;
      int k = 0;
      while (k < 2 && pick > areas[k]) pick -= areas[k++];
      Vector3d l(h.x() * (2 * u(rng) - 1), h.y() * (2 * u(rng) - 1), h.z() * (2 * u(rng) - 1));
      l[k] = u(rng) < 0.5 ? -h[k] : h[k];
      out.push_back(b.pose.position + b.pose.orientation * l);
    }
  }
  return out;
}

bool sampled_collides(const glfd::Shape& a, const glfd::Shape& b, int n, std::mt19937_64& rng) {
  for (const auto& p : surface_samples(a, n, rng)) {
    if (point_inside(b, p)) return true;
  }
  for (const auto& p : surface_samples(b, n, rng)) {
    if (point_inside(a, p)) return true;
  }
  return false;
}

glfd::Shape inflate(const glfd::Shape& s, double delta) {
  glfd::Shape out = s;
  std::visit(
      [delta](auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, glfd::Box>) {
          v.half_extents.array() += delta;
        } else {
          v.radius += delta;
        }
      },
      out);
  return out;
}

bool brute_in_collision(const glfd::ArmModel& m, const JointConfig& q, const glfd::Environment& env) {
  const auto F = chain(m, q);
  std::vector<std::pair<int, glfd::Capsule>> caps;
  for (const auto& c : m.capsules) {
    const Eigen::Matrix4d& T = F[c.frame];
    const Vector3d a = (T * c.p0.homogeneous()).head<3>(), b = (T * c.p1.homogeneous()).head<3>();
    caps.push_back({c.frame, glfd::Capsule{a, b, c.radius}});
  }
  const auto shapes = env.all_shapes();
  bool hit = false;
  for (const auto& [f, c] : caps) {
    for (const auto& s : shapes) hit = hit || glfd::shape_distance(c, s) <= glfd::kContactTolerance;
  }
  for (std::size_t i = 0; i < caps.size(); ++i) {
    for (std::size_t j = 0; j < caps.size(); ++j) {
      if (i == j || std::abs(caps[i].first - caps[j].first) <= 1) continue;
      hit = hit || glfd::shape_distance(caps[i].second, caps[j].second) <= glfd::kContactTolerance;
    }
  }
  return hit;
}

std::vector<std::pair<PoseIndex, PoseIndex>> brute_graph(const glfd::TaskGrid& g, double radius) {
  const auto& ori = g.orientation_set();
  const std::size_t no = ori.size();
  auto ang = [](const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
    return 2.0 * std::acos(std::min(1.0, std::abs(a.dot(b))));
  };
  double min_sep = INFINITY;
  for (std::size_t a = 0; a < no; ++a) {
    for (std::size_t b = a + 1; b < no; ++b) {
      if (ang(ori[a], ori[b]) > 1e-6) min_sep = std::min(min_sep, ang(ori[a], ori[b]));
    }
  }
  std::vector<std::pair<PoseIndex, PoseIndex>> edges;
  for (PoseIndex i = 0; i < g.size(); ++i) {
    for (PoseIndex j = i + 1; j < g.size(); ++j) {
      const double d = (g.pose(i).position - g.pose(j).position).norm();
      const std::size_t oi = i % no, oj = j % no;
      const bool same_point = d < 1e-12;
      const bool link = (oi == oj && d <= radius) || (same_point && ang(ori[oi], ori[oj]) <= min_sep * (1 + 1e-6));
      if (link) edges.emplace_back(i, j);
    }
  }
  return edges;
}

PoseIndex linear_nearest(const glfd::TaskGrid& g, const glfd::Pose& q, double w_rot) {
  PoseIndex best = 0;
  double best_d = INFINITY;
  for (PoseIndex i = 0; i < g.size(); ++i) {
    const double d = (g.pose(i).position - q.position).norm() +
                     w_rot * glfd::angular_distance(g.pose(i).orientation, q.orientation);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<PoseIndex> colliding_members(const glfd::Region& r, const glfd::ArmModel& m, const glfd::Environment& env) {
  std::vector<PoseIndex> out;
  for (const auto& e : r.mapping.entries) {
    if (!glfd::within_limits(m, e.config) || brute_in_collision(m, e.config, env)) out.push_back(e.pose);
  }
  return out;
}

std::size_t epsilon_violations(const glfd::Region& r, const glfd::TaskGraph& graph) {
  std::size_t bad = 0;
  for (const auto& [i, j] : graph.edges) {
    const JointConfig* a = r.mapping.find(i);
    const JointConfig* b = r.mapping.find(j);
    if (!a || !b) continue;
    double d = 0.0;
    for (int k = 0; k < 6; ++k) d = std::max(d, std::abs((*a)[k] - (*b)[k]));
    if (d > r.epsilon) ++bad;
  }
  return bad;
}

const Wall& wall() {
  static const Wall w = [] {
    Wall out{glfd::Workspace::build(glfd::arm_model_from_json(glfd::read_json_file(data_path("ur5.json"))),
                                    glfd::grid_spec_from_json(glfd::read_json_file(data_path("wall_grid.json")))),
             glfd::environment_from_json(glfd::read_json_file(data_path("wall_env.json"))),
             {},
             {}};
    out.regions = glfd::plan_regions(out.ws.model, out.env, out.ws.graph, glfd::PlannerParams{});
    out.primary = glfd::select_primary_region(out.regions);
    return out;
  }();
  return w;
}

std::vector<JointConfig> Planar2::ik(double x, double y) const {
  const double c2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2 * l1 * l2);
  if (c2 < -1 || c2 > 1) return {};
  std::vector<JointConfig> out;
  for (double s : {1.0, -1.0}) {
    const double t2 = s * std::acos(c2);
    if (std::abs(std::sin(t2)) < 1e-9 && s < 0) break;
    const double t1 = std::atan2(y, x) - std::atan2(l2 * std::sin(t2), l1 + l2 * std::cos(t2));
    JointConfig q = JointConfig::Zero();
    q[0] = std::remainder(t1, 2 * M_PI);
    q[1] = t2;
    out.push_back(q);
  }
  return out;
}

bool Planar2::collides(const JointConfig& q, const glfd::Sphere& obstacle) const {
  const Vector3d o(0, 0, 0);
  const Vector3d e(l1 * std::cos(q[0]), l1 * std::sin(q[0]), 0);
  const Vector3d t = e + Vector3d(l2 * std::cos(q[0] + q[1]), l2 * std::sin(q[0] + q[1]), 0);
  return seg_point(o, e, obstacle.center) <= radius + obstacle.radius ||
         seg_point(e, t, obstacle.center) <= radius + obstacle.radius;
}

Line::Line()
    : grid(glfd::build_grid(Eigen::AlignedBox3d(Eigen::Vector3d(-0.275, 0.3, 0), Eigen::Vector3d(0.275, 0.3, 0)), 0.05,
                            Eigen::Quaterniond::Identity(), {})),
      graph(glfd::build_graph(grid, 0.06)) {}

glfd::CandidateTable planar_candidates(const Planar2& arm, const glfd::TaskGrid& grid, const glfd::Sphere* obstacle) {
  glfd::CandidateTable t;
  t.per_pose.resize(grid.size());
  for (PoseIndex i = 0; i < grid.size(); ++i) {
    const Eigen::Vector3d p = grid.pose(i).position;
    for (const auto& q : arm.ik(p.x(), p.y())) {
      if (!obstacle || !arm.collides(q, *obstacle)) t.per_pose[i].push_back(q);
    }
  }
  return t;
}

Run brute_best_run(const glfd::CandidateTable& cand, const std::vector<char>& blocked, double eps) {
  const std::size_t n = cand.per_pose.size();
  std::vector<std::size_t> radix(n);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    radix[i] = blocked[i] ? 1 : std::max<std::size_t>(1, cand.per_pose[i].size());
    total *= radix[i];
  }
  Run best;
  std::vector<int> pick(n);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      pick[i] = static_cast<int>(c % radix[i]);
      c /= radix[i];
    }
    auto usable = [&](std::size_t i) { return !blocked[i] && !cand.per_pose[i].empty(); };
    std::size_t i = 0;
    while (i < n) {
      if (!usable(i)) {
        ++i;
        continue;
      }
      Run r{{static_cast<PoseIndex>(i)}, 0.0};
      std::size_t j = i + 1;
      while (j < n && usable(j)) {
        const double d = (cand.per_pose[j - 1][pick[j - 1]] - cand.per_pose[j][pick[j]]).cwiseAbs().maxCoeff();
        if (d > eps) break;
        r.poses.push_back(static_cast<PoseIndex>(j));
        r.cost += d;
        ++j;
      }
      if (r.poses.size() > best.poses.size() ||
          (r.poses.size() == best.poses.size() && r.cost < best.cost - 1e-12)) {
        best = r;
      }
      i = j;
    }
  }
  return best;
}

namespace {
double minjerk(double u) { return u * u * u * (10 - 15 * u + 6 * u * u); }
}  // namespace

glfd::TaskTrajectory minjerk_demo(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Quaterniond& q0,
                                  const Eigen::Vector3d& axis, double angle, double T, double dt) {
  glfd::TaskTrajectory tr;
  const int n = static_cast<int>(std::lround(T / dt));
  for (int i = 0; i <= n; ++i) {
    const double t = i * dt, u = minjerk(t / T);
    const Eigen::Quaterniond q = Eigen::Quaterniond(Eigen::AngleAxisd(angle * u, axis.normalized())) * q0;
    tr.samples.push_back({t, glfd::Pose(a + u * (b - a), q)});
  }
  return tr;
}

glfd::Session wall_session(std::optional<std::filesystem::path> store) {
  const Wall& w = wall();
  glfd::Workspace ws = glfd::Workspace::build(w.ws.model, w.ws.spec);
  glfd::SessionConfig cfg;
  cfg.store_dir = std::move(store);
  return glfd::Session(std::move(ws), w.env, w.primary, cfg);
}

glfd::json pose_message(const glfd::Pose& p, double t) {
  glfd::json m = glfd::pose_to_json(p);
  m["type"] = "pose";
  m["t"] = t;
  return m;
}

std::vector<glfd::json> session_script() {
  using glfd::json;
  const auto pitched = glfd::trajectory_from_json(glfd::read_json_file(data_path("wall_demo_pitched.json")));
  const auto down = glfd::trajectory_from_json(glfd::read_json_file(data_path("wall_demo_down.json")));
  const glfd::Pose home = pitched.samples.front().pose;
  std::vector<json> s;
  double clock = 0.0;
  auto wander = [&](int n) {
    for (int i = 0; i < n; ++i) {
      const double a = 0.3 * i;
      glfd::Pose p = home;
      p.position += Vector3d(0.05 * std::sin(a), 0.1 * std::cos(a), std::fmod(0.02 * i, 0.1));
      s.push_back(pose_message(p, clock += 0.02));
    }
  };
  auto record = [&](const glfd::TaskTrajectory& tr, std::size_t n, const std::string& name) {
    s.push_back({{"type", "record_start"}});
    const double t0 = clock += 1.0;
    for (std::size_t i = 0; i < n; ++i) s.push_back(pose_message(tr.samples[i].pose, t0 + tr.samples[i].t));
    clock = t0 + tr.samples[n - 1].t;
    s.push_back({{"type", "record_stop"}, {"name", name}});
  };

  s.push_back({{"type", "get_region"}});
  wander(20);
  record(pitched, pitched.samples.size(), "pitched");
  s.push_back({{"type", "run_pipeline"}, {"demo", "pitched"}});
  record(down, down.samples.size(), "down");
  s.push_back({{"type", "run_pipeline"}, {"demo", "down"}});
  s.push_back({{"type", "add_object"},
               {"id", "crate"},
               {"shape", {{"kind", "box"}, {"center", {0.35, -0.3, 0.3}}, {"orientation", {1, 0, 0, 0}},
                          {"half_extents", {0.04, 0.04, 0.04}}}}});
  wander(20);
  s.push_back({{"type", "get_frame_full"}});
  s.push_back({{"type", "run_pipeline"}, {"demo", "pitched"}, {"name", "pitched_slow"}, {"tau", 6.0}});
  s.push_back({{"type", "remove_object"}, {"id", "crate"}});
  record(pitched, 100, "partial");
  s.push_back({{"type", "run_pipeline"},
               {"demo", "partial"},
               {"goal", {{"p", glfd::vec_to_json(pitched.samples[100].pose.position)}}}});
  wander(40);
  s.push_back({{"type", "bogus"}});
  s.push_back({{"type", "get_region"}});
  s.push_back({{"type", "run_pipeline"}, {"demo", "pitched"}, {"name", "pitched_again"}});
  s.push_back({{"type", "get_frame_full"}});
  return s;
}

}  // namespace oracle
