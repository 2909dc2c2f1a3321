#include "glfd/session_service.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace glfd {

namespace {

struct ProtocolError {
  std::string code;
  std::string message;
  json extra = json::object();
};

[[noreturn]] void bad_request(const std::string& msg) { throw ProtocolError{"bad_request", msg}; }
[[noreturn]] void bad_state(const std::string& msg) { throw ProtocolError{"bad_state", msg}; }

// Wraps parse errors of a message field as bad_request.
template <typename F>
auto parse_field(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    bad_request(std::string(what) + ": " + e.what());
  } catch (const json::exception& e) {
    bad_request(std::string(what) + ": " + e.what());
  }
}

std::string name_field(const json& msg, const char* key) {
  if (!msg.contains(key) || !msg[key].is_string()) bad_request(std::string("missing string field '") + key + "'");
  const std::string name = msg[key].get<std::string>();
  const bool ok = !name.empty() && name.size() <= 64 && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }) && name.front() != '.';
  if (!ok) bad_request(std::string("field '") + key + "' must match [A-Za-z0-9_.-]{1,64} and not start with '.'");
  return name;
}

json ack(const std::string& of, json extra = json::object()) {
  extra["type"] = "ack";
  extra["of"] = of;
  return extra;
}

}  // namespace

json error_message(const std::string& code, const std::string& message) {
  return {{"type", "error"}, {"code", code}, {"message", message}};
}

Session::Session(Workspace workspace, Environment env, Region region, SessionConfig config)
    : ws_(std::move(workspace)), config_(std::move(config)) {
  config_.guidance.validate();
  config_.cdmp.validate();
  if (region.graph_ref != ws_.hash()) throw std::invalid_argument("region was built on a different grid");
  if (region.env_revision > env.revision()) throw std::invalid_argument("region is newer than the environment");
  if (region.env_revision != env.revision()) region = update_region(region, ws_.model, env, ws_.graph);
  auto snap = std::make_shared<SessionSnapshot>();
  snap->classifier = std::make_shared<VoxelClassifier>(ws_.model, *ws_.grid, env);
  snap->env = std::move(env);
  snap->region = std::move(region);
  snapshot_ = std::move(snap);
}

std::shared_ptr<const SessionSnapshot> Session::snapshot() const {
  std::lock_guard<std::mutex> lock(snapshot_mutex_);
  return snapshot_;
}

Outgoing Session::handle_line(const std::string& line) {
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::parse_error& e) {
    return {{error_message("bad_request", std::string("malformed JSON: ") + e.what())}, {}};
  }
  return handle_message(msg);
}

Outgoing Session::handle_message(const json& msg) {
  try {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      bad_request("message must be an object with a string 'type'");
    }
    const std::string type = msg["type"].get<std::string>();
    if (type == "pose") return on_pose(msg);
    if (type == "record_start") return on_record_start();
    if (type == "record_stop") return on_record_stop(msg);
    if (type == "add_object") return on_add_object(msg);
    if (type == "remove_object") return on_remove_object(msg);
    if (type == "run_pipeline") return on_run_pipeline(msg);
    if (type == "get_region") return on_get_region();
    if (type == "get_frame_full") return on_get_frame_full();
    bad_request("unknown message type '" + type + "'");
  } catch (const ProtocolError& e) {
    json err = error_message(e.code, e.message);
    err.update(e.extra);
    return {{err}, {}};
  }
}

Outgoing Session::on_pose(const json& msg) {
  const Pose pose = parse_field("pose", [&] { return pose_from_json(msg); });
  if (!msg.contains("t") || !msg["t"].is_number()) bad_request("pose needs a numeric 't'");
  const ToolPose tool{pose, msg["t"].get<double>()};

  Outgoing out;
  if (recording_) {
    auto& buf = recording_->samples;
    if (!buf.empty() && !(tool.timestamp > buf.back().t)) {
      out.replies.push_back(error_message("bad_request", "recorded pose timestamps must strictly increase; sample dropped"));
    } else {
      buf.push_back({tool.timestamp, pose});
    }
  }

  const auto snap = snapshot();
  GuidanceFrame frame = blocked_voxels(*ws_.grid, snap->region, tool, config_.guidance, *snap->classifier);
  if (last_frame_ && last_frame_->region_revision == frame.region_revision) {
    out.replies.push_back(to_json(frame_diff(*last_frame_, frame)));
  } else {
    out.replies.push_back(to_json(frame));
  }
  last_frame_ = std::move(frame);
  last_tool_ = tool;
  return out;
}

Outgoing Session::on_record_start() {
  if (recording_) bad_state("already recording");
  recording_.emplace();
  return {{ack("record_start")}, {}};
}

Outgoing Session::on_record_stop(const json& msg) {
  if (!recording_) bad_state("record_stop without record_start");
  const std::string name = name_field(msg, "name");
  TaskTrajectory demo = std::move(*recording_);
  recording_.reset();
  if (demo.samples.size() < 2) bad_state("recording holds fewer than two poses; discarded");
  const double t0 = demo.samples.front().t;
  for (auto& s : demo.samples) s.t -= t0;
  make_sign_continuous(demo);

  store("demos", name, to_json(demo));
  const std::size_t n = demo.samples.size();
  demos_[name] = std::move(demo);
  models_.erase(name);
  return {{ack("record_stop", {{"name", name}, {"samples", n}})}, {}};
}

Outgoing Session::swap_environment(Environment env) {
  auto old = snapshot();
  auto snap = std::make_shared<SessionSnapshot>();
  snap->region = update_region(old->region, ws_.model, env, ws_.graph);
  snap->classifier = std::make_shared<VoxelClassifier>(ws_.model, *ws_.grid, env);
  snap->env = std::move(env);
  const std::size_t removed = old->region.size() - snap->region.size();
  json updated = {{"type", "region_updated"},
                  {"removed_pose_count", removed},
                  {"region_size", snap->region.size()},
                  {"env_revision", snap->env.revision()}};
  {
    std::lock_guard<std::mutex> lock(snapshot_mutex_);
    snapshot_ = std::move(snap);
  }
  last_frame_.reset();

  Outgoing out;
  out.broadcasts.push_back(updated);
  if (recording_) {
    recording_.reset();
    out.broadcasts.push_back(error_message("region_changed", "recording aborted: the region changed"));
  }
  return out;
}

Outgoing Session::on_add_object(const json& msg) {
  if (!msg.contains("id") || !msg["id"].is_string()) bad_request("add_object needs a string 'id'");
  if (!msg.contains("shape")) bad_request("add_object needs a 'shape'");
  const Shape shape = parse_field("shape", [&] { return shape_from_json(msg["shape"]); });
  const std::string id = msg["id"].get<std::string>();
  const auto snap = snapshot();
  if (snap->env.dynamic_objects().count(id)) bad_state("object id already present: " + id);
  return swap_environment(snap->env.add_object(id, shape));
}

Outgoing Session::on_remove_object(const json& msg) {
  if (!msg.contains("id") || !msg["id"].is_string()) bad_request("remove_object needs a string 'id'");
  const std::string id = msg["id"].get<std::string>();
  const auto snap = snapshot();
  if (!snap->env.dynamic_objects().count(id)) bad_state("unknown object id: " + id);
  return swap_environment(snap->env.remove_object(id));
}

Outgoing Session::on_run_pipeline(const json& msg) {
  const std::string demo_name = name_field(msg, "demo");
  const std::string out_name = msg.contains("name") ? name_field(msg, "name") : demo_name;
  auto it = demos_.find(demo_name);
  if (it == demos_.end()) bad_state("unknown demo '" + demo_name + "'");
  const TaskTrajectory& demo = it->second;
  const auto snap = snapshot();

  const auto valid = validate_demo(demo, snap->region, *ws_.grid, config_.guidance.similarity_threshold);
  json offending = json::array();
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (!valid[i]) offending.push_back(i);
  }
  if (!offending.empty()) {
    throw ProtocolError{"demo_out_of_region", "demo leaves the region", {{"samples", offending}}};
  }

  auto mit = models_.find(demo_name);
  if (mit == models_.end()) {
    mit = models_.emplace(demo_name, train(demo, config_.cdmp)).first;
    store("models", demo_name, to_json(mit->second));
  }
  const CDMPModel& model = mit->second;

  Pose goal = model.goal_pose;
  if (msg.contains("goal") && !msg["goal"].is_null()) {
    const json& g = msg["goal"];
    goal.position = parse_field("goal", [&] { return vec_from_json(g.at("p")); });
    if (g.contains("q")) goal.orientation = parse_field("goal", [&] { return quat_from_json(g["q"]); });
    if (!ws_.grid->covers(goal.position)) {
      throw ProtocolError{"goal_out_of_bounds", "goal lies outside the task grid"};
    }
  }
  double tau = model.tau;
  if (msg.contains("tau") && !msg["tau"].is_null()) {
    if (!msg["tau"].is_number() || !(msg["tau"].get<double>() > 0.0)) bad_request("tau must be a positive number");
    tau = msg["tau"].get<double>();
  }
  if (config_.rollout_dt > tau / 10.0) bad_request("tau too short for the session rollout step");

  StoredReproduction rec;
  rec.demo = demo_name;
  rec.target = rollout(model, model.start_pose, goal, tau, config_.rollout_dt);
  const ReproductionParams params = config_.reproduction.value_or(ReproductionParams::for_epsilon(snap->region.epsilon));
  rec.result = reproduce(rec.target, snap->region, *ws_.grid, ws_.model, snap->env, params);

  json doc = to_json(rec.result.trajectory, rec.result.report);
  doc["demo"] = demo_name;
  doc["goal"] = pose_to_json(goal);
  doc["tau"] = tau;
  doc["env_revision"] = snap->env.revision();
  doc["target_trajectory"] = to_json(rec.target);
  store("reproductions", out_name, doc);

  json arm = json::array();
  for (const auto& s : rec.result.trajectory.samples) {
    json pts = json::array();
    for (const auto& T : link_frames(ws_.model, s.config)) pts.push_back(vec_to_json(T.translation()));
    arm.push_back(pts);
  }
  json result = to_json(rec.result.trajectory, rec.result.report);
  result["type"] = "pipeline_result";
  result["name"] = out_name;
  result["demo"] = demo_name;
  result["arm_points"] = arm;
  reproductions_[out_name] = std::move(rec);
  return {{result}, {}};
}

Outgoing Session::on_get_region() const {
  const auto snap = snapshot();
  return {{{{"type", "region"},
            {"graph_hash", hash_to_hex(snap->region.graph_ref)},
            {"epsilon", snap->region.epsilon},
            {"env_revision", snap->region.env_revision},
            {"pose_indices", snap->region.pose_indices}}},
          {}};
}

Outgoing Session::on_get_frame_full() {
  if (!last_tool_) bad_state("no tool pose received yet");
  const auto snap = snapshot();
  last_frame_ = blocked_voxels(*ws_.grid, snap->region, *last_tool_, config_.guidance, *snap->classifier);
  return {{to_json(*last_frame_)}, {}};
}

void Session::store(const std::string& kind, const std::string& name, const json& doc) const {
  if (!config_.store_dir) return;
  write_json_file(*config_.store_dir / kind / (name + ".json"), doc);
}

}  // namespace glfd
