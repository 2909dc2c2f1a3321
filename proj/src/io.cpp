#include "glfd/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace glfd {

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw std::invalid_argument(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

// Rethrows nlohmann type errors as std::invalid_argument.
template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed ") + what + ": " + e.what());
  }
}

std::vector<double> numbers(const json& j, std::size_t n, const char* what) {
  if (!j.is_array() || j.size() != n) {
    throw std::invalid_argument(std::string(what) + " must be an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw std::invalid_argument(std::string(what) + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

json capsules_to_json(const std::vector<LinkCapsule>& caps) {
  json a = json::array();
  for (const auto& c : caps) {
    a.push_back({{"frame", c.frame}, {"p0", vec_to_json(c.p0)}, {"p1", vec_to_json(c.p1)}, {"radius", c.radius}});
  }
  return a;
}

std::vector<LinkCapsule> capsules_from_json(const json& j) {
  std::vector<LinkCapsule> out;
  for (const auto& c : j) {
    out.push_back({field(c, "frame").get<int>(), vec_from_json(field(c, "p0")), vec_from_json(field(c, "p1")),
                   number(c, "radius")});
  }
  return out;
}

json weights_to_json(const Eigen::Matrix3Xd& w) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) {
    json row = json::array();
    for (int c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
    a.push_back(row);
  }
  return a;
}

Eigen::Matrix3Xd weights_from_json(const json& j, int n) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("weights must be 3 rows");
  Eigen::Matrix3Xd w(3, n);
  for (int r = 0; r < 3; ++r) {
    const auto row = numbers(j[r], n, "weight row");
    for (int c = 0; c < n; ++c) w(r, c) = row[c];
  }
  return w;
}

json indices_to_json(const std::vector<std::size_t>& v) {
  json a = json::array();
  for (auto i : v) a.push_back(i);
  return a;
}

}  // namespace

json vec_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec_from_json(const json& j) {
  const auto v = numbers(j, 3, "3-vector");
  return {v[0], v[1], v[2]};
}

json quat_to_json(const Eigen::Quaterniond& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

Eigen::Quaterniond quat_from_json(const json& j) {
  const auto v = numbers(j, 4, "quaternion");
  Eigen::Quaterniond q(v[0], v[1], v[2], v[3]);
  if (!(q.norm() > 1e-9)) throw std::invalid_argument("quaternion must be nonzero");
  return q.normalized();
}

json pose_to_json(const Pose& p) { return {{"p", vec_to_json(p.position)}, {"q", quat_to_json(p.orientation)}}; }

Pose pose_from_json(const json& j) { return Pose(vec_from_json(field(j, "p")), quat_from_json(field(j, "q"))); }

json config_to_json(const JointConfig& c) {
  json a = json::array();
  for (int i = 0; i < kNumJoints; ++i) a.push_back(c[i]);
  return a;
}

JointConfig config_from_json(const json& j) {
  const auto v = numbers(j, kNumJoints, "joint config");
  JointConfig c;
  for (int i = 0; i < kNumJoints; ++i) c[i] = v[i];
  return c;
}

json to_json(const ArmModel& m) {
  json dh = json::array(), lim = json::array();
  for (const auto& r : m.dh) dh.push_back({{"a", r.a}, {"alpha", r.alpha}, {"d", r.d}, {"theta_offset", r.theta_offset}});
  for (const auto& l : m.limits) lim.push_back({{"lo", l.lo}, {"hi", l.hi}});
  return {{"name", m.name},
          {"dh_parameters", dh},
          {"joint_limits", lim},
          {"collision_capsules", capsules_to_json(m.capsules)},
          {"visual_cylinders", capsules_to_json(m.visual)},
          {"base_pose", pose_to_json(m.base)},
          {"reach_radius", m.reach_radius}};
}

ArmModel arm_model_from_json(const json& j) {
  return guarded("arm model", [&] {
    ArmModel m;
    m.name = j.value("name", std::string("arm"));
    const json& dh = field(j, "dh_parameters");
    const json& lim = field(j, "joint_limits");
    if (!dh.is_array() || dh.size() != kNumJoints) throw std::invalid_argument("dh_parameters must have 6 rows");
    if (!lim.is_array() || lim.size() != kNumJoints) throw std::invalid_argument("joint_limits must have 6 rows");
    for (int i = 0; i < kNumJoints; ++i) {
      m.dh[i] = {number(dh[i], "a"), number(dh[i], "alpha"), number(dh[i], "d"), dh[i].value("theta_offset", 0.0)};
      m.limits[i] = {number(lim[i], "lo"), number(lim[i], "hi")};
    }
    m.capsules = capsules_from_json(field(j, "collision_capsules"));
    if (j.contains("visual_cylinders")) m.visual = capsules_from_json(j["visual_cylinders"]);
    m.base = j.contains("base_pose") ? pose_from_json(j["base_pose"]) : Pose();
    m.reach_radius = number(j, "reach_radius");
    m.validate();
    return m;
  });
}

json to_json(const Shape& s) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Box>) {
          return {{"kind", "box"},
                  {"center", vec_to_json(v.pose.position)},
                  {"orientation", quat_to_json(v.pose.orientation)},
                  {"half_extents", vec_to_json(v.half_extents)}};
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return {{"kind", "sphere"}, {"center", vec_to_json(v.center)}, {"radius", v.radius}};
        } else {
          return {{"kind", "capsule"}, {"a", vec_to_json(v.a)}, {"b", vec_to_json(v.b)}, {"radius", v.radius}};
        }
      },
      s);
}

Shape shape_from_json(const json& j) {
  return guarded("shape", [&]() -> Shape {
    const std::string kind = field(j, "kind").get<std::string>();
    Shape s;
    if (kind == "box") {
      const Eigen::Quaterniond q =
          j.contains("orientation") ? quat_from_json(j["orientation"]) : Eigen::Quaterniond::Identity();
      s = Box{Pose(vec_from_json(field(j, "center")), q), vec_from_json(field(j, "half_extents"))};
    } else if (kind == "sphere") {
      s = Sphere{vec_from_json(field(j, "center")), number(j, "radius")};
    } else if (kind == "capsule") {
      s = Capsule{vec_from_json(field(j, "a")), vec_from_json(field(j, "b")), number(j, "radius")};
    } else {
      throw std::invalid_argument("unknown shape kind: " + kind);
    }
    validate_shape(s);
    return s;
  });
}

json to_json(const Environment& env) {
  json st = json::array(), dyn = json::array();
  for (const auto& s : env.static_shapes()) st.push_back(to_json(s));
  for (const auto& [id, s] : env.dynamic_objects()) dyn.push_back({{"id", id}, {"shape", to_json(s)}});
  return {{"static_shapes", st}, {"dynamic_objects", dyn}, {"revision", env.revision()}};
}

Environment environment_from_json(const json& j) {
  return guarded("environment", [&] {
    std::vector<Shape> st;
    for (const auto& s : field(j, "static_shapes")) st.push_back(shape_from_json(s));
    std::vector<std::pair<std::string, Shape>> dyn;
    if (j.contains("dynamic_objects")) {
      for (const auto& o : j["dynamic_objects"]) {
        dyn.emplace_back(field(o, "id").get<std::string>(), shape_from_json(field(o, "shape")));
      }
    }
    // Each add bumps the revision, so start low enough to land on the stored one.
    const std::uint64_t rev = j.value("revision", static_cast<std::uint64_t>(dyn.size()));
    if (rev < dyn.size()) throw std::invalid_argument("environment revision smaller than its object count");
    Environment env(std::move(st), rev - dyn.size());
    for (const auto& [id, s] : dyn) env = env.add_object(id, s);
    return env;
  });
}

json to_json(const GridSpec& g) {
  json off = json::array();
  for (const auto& q : g.orientation_offsets) off.push_back(quat_to_json(q));
  return {{"bounds", {{"min", vec_to_json(g.bounds.min())}, {"max", vec_to_json(g.bounds.max())}}},
          {"spacing", g.position_spacing},
          {"nominal", quat_to_json(g.nominal_orientation)},
          {"offsets", off},
          {"ball_radius", g.ball_radius}};
}

GridSpec grid_spec_from_json(const json& j) {
  return guarded("grid spec", [&] {
    GridSpec g;
    const json& b = field(j, "bounds");
    g.bounds = Eigen::AlignedBox3d(vec_from_json(field(b, "min")), vec_from_json(field(b, "max")));
    g.position_spacing = number(j, "spacing");
    g.nominal_orientation = quat_from_json(field(j, "nominal"));
    if (j.contains("offsets")) {
      for (const auto& o : j["offsets"]) {
        if (o.is_object()) {
          g.orientation_offsets.push_back(axis_angle(vec_from_json(field(o, "axis")), number(o, "angle_deg") * M_PI / 180.0));
        } else {
          g.orientation_offsets.push_back(quat_from_json(o));
        }
      }
    }
    g.ball_radius = number(j, "ball_radius");
    return g;
  });
}

json to_json(const TaskTrajectory& t) {
  json a = json::array();
  for (const auto& s : t.samples) {
    a.push_back({{"t", s.t}, {"p", vec_to_json(s.pose.position)}, {"q", quat_to_json(s.pose.orientation)}});
  }
  return a;
}

TaskTrajectory trajectory_from_json(const json& j) {
  return guarded("trajectory", [&] {
    if (!j.is_array()) throw std::invalid_argument("trajectory must be an array");
    TaskTrajectory t;
    for (const auto& s : j) t.samples.push_back({number(s, "t"), pose_from_json(s)});
    t.validate();
    return t;
  });
}

json to_json(const CDMPModel& m) {
  return {{"n_kernels", m.n_kernels},
          {"position_weights", weights_to_json(m.position_weights)},
          {"orientation_weights", weights_to_json(m.orientation_weights)},
          {"tau", m.tau},
          {"alpha", m.alpha},
          {"beta", m.beta},
          {"alpha_s", m.alpha_s},
          {"start_pose", pose_to_json(m.start_pose)},
          {"goal_pose", pose_to_json(m.goal_pose)}};
}

CDMPModel cdmp_model_from_json(const json& j) {
  return guarded("CDMP model", [&] {
    CDMPModel m;
    m.n_kernels = field(j, "n_kernels").get<int>();
    if (m.n_kernels < 2) throw std::invalid_argument("n_kernels must be at least 2");
    m.position_weights = weights_from_json(field(j, "position_weights"), m.n_kernels);
    m.orientation_weights = weights_from_json(field(j, "orientation_weights"), m.n_kernels);
    m.tau = number(j, "tau");
    m.alpha = number(j, "alpha");
    m.beta = number(j, "beta");
    m.alpha_s = number(j, "alpha_s");
    m.start_pose = pose_from_json(field(j, "start_pose"));
    m.goal_pose = pose_from_json(field(j, "goal_pose"));
    m.validate();
    return m;
  });
}

json to_json(const ReproductionReport& r) {
  return {{"success", r.success},
          {"max_joint_jump", r.max_joint_jump},
          {"out_of_region_samples", indices_to_json(r.out_of_region_samples)},
          {"collision_samples", indices_to_json(r.collision_samples)},
          {"unreachable_samples", indices_to_json(r.unreachable_samples)}};
}

ReproductionReport report_from_json(const json& j) {
  return guarded("report", [&] {
    ReproductionReport r;
    r.success = field(j, "success").get<bool>();
    r.max_joint_jump = number(j, "max_joint_jump");
    r.out_of_region_samples = field(j, "out_of_region_samples").get<std::vector<std::size_t>>();
    r.collision_samples = field(j, "collision_samples").get<std::vector<std::size_t>>();
    r.unreachable_samples = j.value("unreachable_samples", std::vector<std::size_t>{});
    return r;
  });
}

json to_json(const JointTrajectory& t, const ReproductionReport& r) {
  json a = json::array();
  for (const auto& s : t.samples) a.push_back({{"t", s.t}, {"config", config_to_json(s.config)}});
  return {{"joint_trajectory", a}, {"report", to_json(r)}};
}

json to_json(const GuidanceFrame& f) {
  json b = json::array();
  for (const auto& v : f.blocked) b.push_back({{"i", v.pose_index}, {"class", to_string(v.cls)}, {"opacity", v.opacity}});
  return {{"type", "guidance_full"},
          {"region_revision", f.region_revision},
          {"tool", {{"p", vec_to_json(f.tool.pose.position)}, {"q", quat_to_json(f.tool.pose.orientation)}, {"t", f.tool.timestamp}}},
          {"blocked", b}};
}

namespace {

ToolPose tool_from_json(const json& j) { return {pose_from_json(j), number(j, "t")}; }

}  // namespace

GuidanceFrame guidance_frame_from_json(const json& j) {
  return guarded("guidance frame", [&] {
    GuidanceFrame f;
    f.region_revision = field(j, "region_revision").get<std::uint64_t>();
    f.tool = tool_from_json(field(j, "tool"));
    for (const auto& v : field(j, "blocked")) {
      f.blocked.push_back({field(v, "i").get<PoseIndex>(), voxel_class_from_string(field(v, "class").get<std::string>()),
                           number(v, "opacity")});
    }
    return f;
  });
}

json to_json(const FrameDiff& d) {
  json added = json::array(), removed = json::array(), changed = json::array();
  for (const auto& v : d.added) added.push_back({{"i", v.pose_index}, {"class", to_string(v.cls)}, {"opacity", v.opacity}});
  for (auto i : d.removed) removed.push_back(i);
  for (const auto& [i, op] : d.changed_opacity) changed.push_back({{"i", i}, {"opacity", op}});
  return {{"type", "guidance_diff"},
          {"region_revision", d.region_revision},
          {"tool", {{"p", vec_to_json(d.tool.pose.position)}, {"q", quat_to_json(d.tool.pose.orientation)}, {"t", d.tool.timestamp}}},
          {"added", added},
          {"removed", removed},
          {"changed_opacity", changed}};
}

FrameDiff frame_diff_from_json(const json& j) {
  return guarded("guidance diff", [&] {
    FrameDiff d;
    d.region_revision = field(j, "region_revision").get<std::uint64_t>();
    d.tool = tool_from_json(field(j, "tool"));
    for (const auto& v : field(j, "added")) {
      d.added.push_back({field(v, "i").get<PoseIndex>(), voxel_class_from_string(field(v, "class").get<std::string>()),
                         number(v, "opacity")});
    }
    for (const auto& i : field(j, "removed")) d.removed.push_back(i.get<PoseIndex>());
    for (const auto& v : field(j, "changed_opacity")) d.changed_opacity.emplace_back(field(v, "i").get<PoseIndex>(), number(v, "opacity"));
    return d;
  });
}

Workspace Workspace::build(ArmModel model, GridSpec spec) {
  Workspace ws;
  ws.model = std::move(model);
  ws.spec = std::move(spec);
  ws.grid = std::make_unique<TaskGrid>(build_grid(ws.spec));
  ws.graph = build_graph(*ws.grid, ws.spec.ball_radius);
  return ws;
}

json region_file_json(const Region& region, const Workspace& ws, const Environment& env) {
  json entries = json::array();
  for (const auto& e : region.mapping.entries) entries.push_back({{"pose_index", e.pose}, {"config", config_to_json(e.config)}});
  return {{"graph_hash", hash_to_hex(region.graph_ref)},
          {"epsilon", region.epsilon},
          {"env_revision", region.env_revision},
          {"total_path_cost", region.mapping.total_path_cost},
          {"entries", entries},
          {"grid", to_json(ws.spec)},
          {"environment", to_json(env)},
          {"arm_model", to_json(ws.model)}};
}

RegionFile region_file_from_json(const json& j) {
  return guarded("region file", [&] {
    RegionFile rf{Workspace::build(arm_model_from_json(field(j, "arm_model")), grid_spec_from_json(field(j, "grid"))),
                  environment_from_json(field(j, "environment")), Region{}};
    const std::string stored = field(j, "graph_hash").get<std::string>();
    if (stored != hash_to_hex(rf.workspace.hash())) {
      throw std::invalid_argument("region file graph hash " + stored + " does not match its grid (" +
                                  hash_to_hex(rf.workspace.hash()) + ")");
    }
    std::vector<GHAMapping::Entry> entries;
    for (const auto& e : field(j, "entries")) {
      const auto idx = field(e, "pose_index").get<PoseIndex>();
      if (idx >= rf.workspace.grid->size()) throw std::invalid_argument("region pose_index out of range");
      entries.push_back({idx, config_from_json(field(e, "config"))});
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.pose < b.pose; });
    rf.region = make_region(std::move(entries), rf.workspace.graph, number(j, "epsilon"),
                            field(j, "env_revision").get<std::uint64_t>(), rf.workspace.hash());
    return rf;
  });
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string hash_to_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace glfd
