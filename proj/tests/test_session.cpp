#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "glfd/server.hpp"
#include "glfd/session_service.hpp"
#include "oracles.hpp"

using namespace glfd;
namespace fs = std::filesystem;
using Eigen::Vector3d;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "glfd_test_session" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// relative path -> bytes, for every file below dir
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

const json& only_reply(const Outgoing& o) {
  REQUIRE(o.replies.size() == 1);
  return o.replies.front();
}

std::string error_code(const Outgoing& o) {
  const json& r = only_reply(o);
  REQUIRE(r["type"] == "error");
  return r["code"].get<std::string>();
}

TaskTrajectory data_traj(const std::string& name) {
  return trajectory_from_json(read_json_file(oracle::data_path(name)));
}

void record(Session& s, const TaskTrajectory& tr, const std::string& name, double t0 = 5.0) {
  CHECK(only_reply(s.handle_message({{"type", "record_start"}}))["type"] == "ack");
  for (const auto& smp : tr.samples) s.handle_message(oracle::pose_message(smp.pose, t0 + smp.t));
  const json r = only_reply(s.handle_message({{"type", "record_stop"}, {"name", name}}));
  CHECK(r["type"] == "ack");
  CHECK(r["samples"] == tr.samples.size());
}

json box_shape(const Vector3d& c, double h) {
  return {{"kind", "box"}, {"center", vec_to_json(c)}, {"orientation", {1, 0, 0, 0}}, {"half_extents", {h, h, h}}};
}

}  // namespace

TEST_CASE("pose messages: full frame first, then diffs that rebuild the frame") {
  Session s = oracle::wall_session();
  const auto& w = oracle::wall();
  const TaskGrid& g = *s.workspace().grid;
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  GuidanceFrame client;
  for (int i = 0; i < 30; ++i) {
    const Pose p(Vector3d(0.6 + u(rng), u(rng), 0.3 + u(rng)), g.orientation_set()[i % 3]);
    const json r = only_reply(s.handle_message(oracle::pose_message(p, 0.1 * i)));
    if (i == 0) {
      REQUIRE(r["type"] == "guidance_full");
      client = guidance_frame_from_json(r);
    } else {
      REQUIRE(r["type"] == "guidance_diff");
      client = apply_diff(client, frame_diff_from_json(r));
    }
    const VoxelClassifier cls(w.ws.model, g, w.env);
    const auto expect = blocked_voxels(g, w.primary, {p, 0.1 * i}, GuidanceParams{}, cls);
    CHECK(client.blocked == expect.blocked);
    CHECK(client.region_revision == w.env.revision());
  }
  const json full = only_reply(s.handle_message({{"type", "get_frame_full"}}));
  CHECK(guidance_frame_from_json(full).blocked == client.blocked);
}

TEST_CASE("recording buffers poses; timestamps are rebased and must increase") {
  const fs::path dir = fresh_dir("record");
  Session s = oracle::wall_session(dir);
  const auto tr = data_traj("wall_demo_pitched.json");
  record(s, tr, "demo1", 12.5);
  REQUIRE(s.demos().count("demo1"));
  const auto& d = s.demos().at("demo1");
  CHECK(d.samples.size() == tr.samples.size());
  CHECK(d.samples.front().t == 0.0);
  CHECK_NOTHROW(d.validate());
  CHECK(fs::exists(dir / "demos" / "demo1.json"));
  CHECK(trajectory_from_json(read_json_file(dir / "demos" / "demo1.json")).samples.size() == tr.samples.size());

  s.handle_message({{"type", "record_start"}});
  s.handle_message(oracle::pose_message(tr.samples[0].pose, 1.0));
  const Outgoing dup = s.handle_message(oracle::pose_message(tr.samples[1].pose, 1.0));
  REQUIRE(dup.replies.size() == 2);
  CHECK(dup.replies[0]["code"] == "bad_request");
  CHECK(dup.replies[1]["type"] == "guidance_diff");
  s.handle_message(oracle::pose_message(tr.samples[2].pose, 1.1));
  const json r = only_reply(s.handle_message({{"type", "record_stop"}, {"name", "two"}}));
  CHECK(r["samples"] == 2);
}

TEST_CASE("error codes") {
  Session s = oracle::wall_session();
  CHECK(error_code(s.handle_line("{not json")) == "bad_request");
  CHECK(error_code(s.handle_line("[1,2]")) == "bad_request");
  CHECK(error_code(s.handle_message({{"type", "launch"}})) == "bad_request");
  CHECK(error_code(s.handle_message({{"type", "pose"}, {"p", {0, 0}}, {"q", {1, 0, 0, 0}}, {"t", 0}})) ==
        "bad_request");
  CHECK(error_code(s.handle_message({{"type", "pose"}, {"p", {0.5, 0, 0.3}}, {"q", {1, 0, 0, 0}}})) ==
        "bad_request");
  CHECK(error_code(s.handle_message({{"type", "get_frame_full"}})) == "bad_state");
  CHECK(error_code(s.handle_message({{"type", "record_stop"}, {"name", "x"}})) == "bad_state");
  s.handle_message({{"type", "record_start"}});
  CHECK(error_code(s.handle_message({{"type", "record_start"}})) == "bad_state");
  CHECK(error_code(s.handle_message({{"type", "record_stop"}, {"name", "../etc"}})) == "bad_request");
  CHECK(error_code(s.handle_message({{"type", "record_stop"}, {"name", ".hidden"}})) == "bad_request");
  CHECK(s.recording());
  CHECK(error_code(s.handle_message({{"type", "record_stop"}, {"name", "empty"}})) == "bad_state");
  CHECK_FALSE(s.recording());
  CHECK(error_code(s.handle_message({{"type", "remove_object"}, {"id", "ghost"}})) == "bad_state");
  CHECK(error_code(s.handle_message({{"type", "add_object"}, {"id", "x"}, {"shape", {{"kind", "cone"}}}})) ==
        "bad_request");
  CHECK(error_code(s.handle_message({{"type", "add_object"}, {"shape", box_shape({3, 3, 3}, 0.1)}})) ==
        "bad_request");
  CHECK(s.handle_message({{"type", "add_object"}, {"id", "x"}, {"shape", box_shape({3, 3, 3}, 0.1)}}).broadcasts.size() ==
        1);
  CHECK(error_code(s.handle_message({{"type", "add_object"}, {"id", "x"}, {"shape", box_shape({3, 3, 3}, 0.1)}})) ==
        "bad_state");
  CHECK(error_code(s.handle_message({{"type", "run_pipeline"}, {"demo", "nope"}})) == "bad_state");
  CHECK(error_code(s.handle_message({{"type", "run_pipeline"}})) == "bad_request");
}

TEST_CASE("add_object: removed count matches the recheck oracle; guidance resyncs") {
  Session s = oracle::wall_session();
  const auto& w = oracle::wall();
  const Pose probe = s.workspace().grid->pose(w.primary.pose_indices[w.primary.size() / 3]);
  s.handle_message(oracle::pose_message(probe, 0.0));

  const Vector3d c = probe.position;
  const Environment env = w.env.add_object("crate", Box{Pose(c, Eigen::Quaterniond::Identity()),
                                                         Vector3d(0.04, 0.04, 0.04)});
  const auto bad = oracle::colliding_members(w.primary, w.ws.model, env);
  REQUIRE(!bad.empty());
  // survivors, then their largest connected piece
  std::set<PoseIndex> alive(w.primary.pose_indices.begin(), w.primary.pose_indices.end());
  for (PoseIndex p : bad) alive.erase(p);
  std::size_t largest = 0;
  std::set<PoseIndex> seen;
  for (PoseIndex s0 : alive) {
    if (seen.count(s0)) continue;
    std::vector<PoseIndex> comp{s0};
    seen.insert(s0);
    for (std::size_t k = 0; k < comp.size(); ++k) {
      for (PoseIndex nb : w.ws.graph.adjacency[comp[k]]) {
        if (alive.count(nb) && seen.insert(nb).second) comp.push_back(nb);
      }
    }
    largest = std::max(largest, comp.size());
  }

  const Outgoing o = s.handle_message({{"type", "add_object"}, {"id", "crate"}, {"shape", box_shape(c, 0.04)}});
  CHECK(o.replies.empty());
  REQUIRE(o.broadcasts.size() == 1);
  const json& up = o.broadcasts[0];
  CHECK(up["type"] == "region_updated");
  CHECK(up["removed_pose_count"] == w.primary.size() - largest);
  CHECK(up["region_size"] == largest);
  CHECK(up["env_revision"] == env.revision());
  CHECK(s.snapshot()->region.size() == largest);
  CHECK(oracle::colliding_members(s.snapshot()->region, w.ws.model, env).empty());

  // next pose: a full frame on the new revision, never a diff against the old one
  const json r = only_reply(s.handle_message(oracle::pose_message(probe, 0.1)));
  CHECK(r["type"] == "guidance_full");
  CHECK(r["region_revision"] == env.revision());
  const json r2 = only_reply(s.handle_message(oracle::pose_message(probe, 0.2)));
  CHECK(r2["type"] == "guidance_diff");
  CHECK(r2["region_revision"] == env.revision());

  const json region = only_reply(s.handle_message({{"type", "get_region"}}));
  CHECK(region["type"] == "region");
  CHECK(region["pose_indices"].size() == largest);

  const Outgoing back = s.handle_message({{"type", "remove_object"}, {"id", "crate"}});
  CHECK(back.broadcasts.at(0)["removed_pose_count"] == 0);
  CHECK(back.broadcasts.at(0)["region_size"] == largest);
}

TEST_CASE("recording across a region update is aborted") {
  Session s = oracle::wall_session();
  const auto tr = data_traj("wall_demo_pitched.json");
  s.handle_message({{"type", "record_start"}});
  for (int i = 0; i < 10; ++i) s.handle_message(oracle::pose_message(tr.samples[i].pose, tr.samples[i].t));
  const Outgoing o =
      s.handle_message({{"type", "add_object"}, {"id", "far"}, {"shape", box_shape({-2, -2, 2}, 0.1)}});
  REQUIRE(o.broadcasts.size() == 2);
  CHECK(o.broadcasts[0]["type"] == "region_updated");
  CHECK(o.broadcasts[1]["type"] == "error");
  CHECK(o.broadcasts[1]["code"] == "region_changed");
  CHECK_FALSE(s.recording());
  CHECK(error_code(s.handle_message({{"type", "record_stop"}, {"name", "lost"}})) == "bad_state");
  CHECK(s.demos().empty());
}

TEST_CASE("pipeline: in-region demo succeeds and is stored") {
  const fs::path dir = fresh_dir("pipeline");
  Session s = oracle::wall_session(dir);
  record(s, data_traj("wall_demo_pitched.json"), "weld");
  const json r = only_reply(s.handle_message({{"type", "run_pipeline"}, {"demo", "weld"}}));
  REQUIRE(r["type"] == "pipeline_result");
  CHECK(r["report"]["success"] == true);
  CHECK(r["report"]["max_joint_jump"].get<double>() <= 1.5 * 0.35);
  const std::size_t n = r["joint_trajectory"].size();
  CHECK(n == static_cast<std::size_t>(std::lround(1.2 * 3.0 / 0.01)));
  CHECK(r["arm_points"].size() == n);
  CHECK(r["arm_points"][0].size() == 7);
  CHECK(fs::exists(dir / "models" / "weld.json"));
  CHECK(fs::exists(dir / "reproductions" / "weld.json"));
  const json stored = read_json_file(dir / "reproductions" / "weld.json");
  CHECK(stored["report"] == r["report"]);
  CHECK(stored["target_trajectory"].size() == n);

  SUBCASE("tau override doubles the sample count") {
    const json r2 = only_reply(s.handle_message({{"type", "run_pipeline"}, {"demo", "weld"}, {"name", "slow"}, {"tau", 6.0}}));
    REQUIRE(r2["type"] == "pipeline_result");
    CHECK(r2["joint_trajectory"].size() == 2 * n);
    CHECK(s.reproductions().count("slow"));
  }
  SUBCASE("goal outside the grid is rejected") {
    const json e = only_reply(s.handle_message({{"type", "run_pipeline"}, {"demo", "weld"}, {"goal", {{"p", {3, 0, 0}}}}}));
    CHECK(e["code"] == "goal_out_of_bounds");
  }
  SUBCASE("bad tau") {
    CHECK(error_code(s.handle_message({{"type", "run_pipeline"}, {"demo", "weld"}, {"tau", -1}})) == "bad_request");
    CHECK(error_code(s.handle_message({{"type", "run_pipeline"}, {"demo", "weld"}, {"tau", 0.05}})) == "bad_request");
  }
}

TEST_CASE("pipeline: out-of-region demo is refused with the offending samples") {
  Session s = oracle::wall_session();
  const auto tr = data_traj("wall_demo_down.json");
  record(s, tr, "down");
  const json e = only_reply(s.handle_message({{"type", "run_pipeline"}, {"demo", "down"}}));
  CHECK(e["type"] == "error");
  CHECK(e["code"] == "demo_out_of_region");
  const auto& w = oracle::wall();
  const auto ok = validate_demo(s.demos().at("down"), w.primary, *w.ws.grid);
  std::vector<std::size_t> expect;
  for (std::size_t i = 0; i < ok.size(); ++i) {
    if (!ok[i]) expect.push_back(i);
  }
  REQUIRE(!expect.empty());
  CHECK(e["samples"].get<std::vector<std::size_t>>() == expect);
  CHECK(s.reproductions().empty());
}

TEST_CASE("replaying the scripted 500-message log gives byte-identical files") {
  const auto script = oracle::session_script();
  REQUIRE(script.size() == 500);
  std::set<std::string> types;
  for (const auto& m : script) types.insert(m["type"].get<std::string>());
  CHECK(types.size() == 9);

  const fs::path a = fresh_dir("replay_a"), b = fresh_dir("replay_b");
  std::vector<std::string> replies_a;
  {
    Session s = oracle::wall_session(a);
    for (const auto& m : script) {
      for (const auto& r : s.handle_line(m.dump()).replies) replies_a.push_back(r.dump());
    }
    CHECK(s.demos().size() == 3);
    CHECK(s.reproductions().size() >= 3);
  }
  std::vector<std::string> replies_b;
  {
    Session s = oracle::wall_session(b);
    for (const auto& m : script) {
      for (const auto& r : s.handle_line(m.dump()).replies) replies_b.push_back(r.dump());
    }
  }
  const auto ta = tree(a), tb = tree(b);
  CHECK(ta.size() >= 9);
  CHECK(ta == tb);
  CHECK(replies_a == replies_b);
  CHECK(ta.count("demos/pitched.json"));
  CHECK(ta.count("models/pitched.json"));
  CHECK(ta.count("reproductions/pitched.json"));
}

TEST_CASE("TCP server: round trip, pose coalescing, logging") {
  const fs::path dir = fresh_dir("tcp");
  Session s = oracle::wall_session(dir / "store");
  std::atomic<bool> stop{false};
  std::atomic<int> port{0};
  ServerOptions opt;
  opt.stop = &stop;
  opt.log_path = dir / "log.jsonl";
  opt.on_listening = [&](int p) { port = p; };
  std::thread th([&] { serve(s, opt); });
  while (port == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port.load()));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);

  const auto tr = data_traj("wall_demo_pitched.json");
  std::string batch;
  for (int i = 0; i < 40; ++i) batch += oracle::pose_message(tr.samples[i].pose, tr.samples[i].t).dump() + "\n";
  batch += "garbage\n";
  batch += json{{"type", "get_region"}}.dump() + "\n";
  REQUIRE(::send(fd, batch.data(), batch.size(), 0) == static_cast<ssize_t>(batch.size()));

  std::string inbox;
  std::vector<json> got;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
  while (std::chrono::steady_clock::now() < deadline) {
    char buf[65536];
    const ssize_t n = ::recv(fd, buf, sizeof buf, MSG_DONTWAIT);
    if (n > 0) inbox.append(buf, n);
    for (std::size_t pos; (pos = inbox.find('\n')) != std::string::npos;) {
      got.push_back(json::parse(inbox.substr(0, pos)));
      inbox.erase(0, pos + 1);
    }
    if (!got.empty() && got.back()["type"] == "region") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ::close(fd);
  stop = true;
  th.join();

  REQUIRE(!got.empty());
  CHECK(got.back()["type"] == "region");
  std::size_t guidance = 0, errors = 0;
  for (const auto& m : got) {
    guidance += m["type"] == "guidance_full" || m["type"] == "guidance_diff";
    errors += m["type"] == "error";
  }
  CHECK(guidance >= 1);
  CHECK(guidance < 40);  // coalesced
  CHECK(errors == 1);

  // the log holds exactly the dispatched messages, in order
  std::ifstream log(dir / "log.jsonl");
  std::vector<json> logged;
  for (std::string line; std::getline(log, line);) logged.push_back(json::parse(line));
  REQUIRE(logged.size() == guidance + 1);
  CHECK(logged.back()["type"] == "get_region");
  CHECK(logged[logged.size() - 2]["t"] == tr.samples[39].t);  // the latest pose is flushed first
}
