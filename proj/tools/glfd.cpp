// glfd: command line front end for planning, validation, training,
// reproduction, classification and the guidance session server.

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "glfd/guidance.hpp"
#include "glfd/io.hpp"
#include "glfd/server.hpp"
#include "glfd/session_service.hpp"

namespace {

using namespace glfd;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotReproducible = 2;

std::atomic<bool> g_stop{false};

Pose parse_goal(const std::vector<double>& v, const Pose& fallback) {
  if (v.size() != 3 && v.size() != 7) throw CLI::ValidationError("--goal", "expects 3 (x y z) or 7 (x y z qw qx qy qz) numbers");
  Pose g = fallback;
  g.position = Eigen::Vector3d(v[0], v[1], v[2]);
  if (v.size() == 7) g.orientation = Eigen::Quaterniond(v[3], v[4], v[5], v[6]).normalized();
  return g;
}

void print_report(const ReproductionReport& r) {
  std::cout << (r.success ? "success" : "FAILED") << "  max_joint_jump " << r.max_joint_jump
            << "  out_of_region " << r.out_of_region_samples.size() << "  collision " << r.collision_samples.size()
            << "  unreachable " << r.unreachable_samples.size() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regions of reproducible motion, guidance and CDMP reproduction for 6-DOF arms"};
  app.require_subcommand(1);

  // plan
  std::string model_path, env_path, grid_path, out_path;
  PlannerParams planner;
  auto* plan = app.add_subcommand("plan", "Plan regions and write the primary one");
  plan->add_option("--model", model_path, "Arm model JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--env", env_path, "Environment JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--grid", grid_path, "Grid spec JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--out", out_path, "Region file to write")->required();
  plan->add_option("--epsilon", planner.epsilon, "Edge bound on config distance (rad)")->capture_default_str();
  plan->add_option("--seed", planner.random_seed, "Random seed")->capture_default_str();
  plan->add_option("--restarts", planner.num_restarts, "Restarts per round")->capture_default_str();
  plan->add_option("--rounds", planner.num_subspace_rounds, "Subspace rounds")->capture_default_str();

  // update
  std::string region_path;
  auto* update = app.add_subcommand("update", "Re-check a region against a changed environment");
  update->add_option("--region", region_path, "Region file")->required()->check(CLI::ExistingFile);
  update->add_option("--env", env_path, "Environment JSON")->required()->check(CLI::ExistingFile);
  update->add_option("--out", out_path, "Updated region file")->required();

  // validate
  std::string demo_path;
  double threshold = kDefaultSimilarityThreshold;
  auto* validate = app.add_subcommand("validate", "Check that a demonstration stays inside the region");
  validate->add_option("--demo", demo_path, "Trajectory JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--region", region_path, "Region file")->required()->check(CLI::ExistingFile);
  validate->add_option("--threshold", threshold, "Orientation similarity threshold")->capture_default_str();

  // train
  CDMPParams cdmp;
  auto* trainc = app.add_subcommand("train", "Fit a CDMP to one demonstration");
  trainc->add_option("--demo", demo_path, "Trajectory JSON")->required()->check(CLI::ExistingFile);
  trainc->add_option("--out", out_path, "Model JSON to write")->required();
  trainc->add_option("--kernels", cdmp.n_kernels, "Kernels per channel")->capture_default_str();

  // reproduce
  std::string cdmp_path, target_path;
  std::vector<double> goal;
  double tau = 0.0, dt = 0.01;
  ReproductionParams rparams;
  double max_step = 0.0;
  auto* reproducec = app.add_subcommand("reproduce", "Roll out a model and map it to joint space");
  auto* opt_model = reproducec->add_option("--model", cdmp_path, "CDMP model JSON")->check(CLI::ExistingFile);
  auto* opt_target = reproducec->add_option("--target", target_path, "Use this task trajectory as-is instead of a rollout")
                         ->check(CLI::ExistingFile);
  opt_model->excludes(opt_target);
  reproducec->add_option("--region", region_path, "Region file")->required()->check(CLI::ExistingFile);
  reproducec->add_option("--goal", goal, "x y z [qw qx qy qz]")->expected(3, 7);
  reproducec->add_option("--tau", tau, "Rollout duration scale (s); default the demo duration");
  reproducec->add_option("--dt", dt, "Rollout sample step (s)")->capture_default_str();
  reproducec->add_option("--k", rparams.k, "Nearest mapped configurations consulted")->capture_default_str();
  reproducec->add_option("--max-step", max_step, "Accepted joint step (rad); default 1.5 epsilon");
  reproducec->add_option("--out", out_path, "Joint trajectory + report JSON")->required();

  // serve
  ServerOptions sopts;
  std::string store_dir, log_path;
  auto* servec = app.add_subcommand("serve", "Run the guidance session server");
  servec->add_option("--region", region_path, "Region file")->required()->check(CLI::ExistingFile);
  servec->add_option("--env", env_path, "Environment JSON (default: the one in the region file)")->check(CLI::ExistingFile);
  servec->add_option("--port", sopts.port, "TCP port")->required();
  servec->add_option("--store", store_dir, "Directory for demos, models and reproductions");
  servec->add_option("--log", log_path, "Append every handled message to this file");
  servec->add_option("--rate", sopts.pose_rate_hz, "Pose processing rate (Hz)")->capture_default_str();

  // replay
  auto* replayc = app.add_subcommand("replay", "Feed a message log to a fresh session");
  replayc->add_option("--region", region_path, "Region file")->required()->check(CLI::ExistingFile);
  replayc->add_option("--env", env_path, "Environment JSON (default: the one in the region file)")->check(CLI::ExistingFile);
  replayc->add_option("--log", log_path, "Message log, one JSON message per line")->required()->check(CLI::ExistingFile);
  replayc->add_option("--store", store_dir, "Directory for demos, models and reproductions")->required();

  // classify
  auto* classifyc = app.add_subcommand("classify", "Classify every pose outside the region");
  classifyc->add_option("--region", region_path, "Region file")->required()->check(CLI::ExistingFile);
  classifyc->add_option("--out", out_path, "Classification JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*plan) {
      planner.validate();
      Workspace ws = Workspace::build(arm_model_from_json(read_json_file(model_path)),
                                      grid_spec_from_json(read_json_file(grid_path)));
      const Environment env = environment_from_json(read_json_file(env_path));
      const auto regions = plan_regions(ws.model, env, ws.graph, planner);
      if (regions.empty()) {
        std::cerr << "no pose of the grid has a valid IK solution\n";
        return kExitNotReproducible;
      }
      const Region& primary = select_primary_region(regions);
      write_json_file(out_path, region_file_json(primary, ws, env));
      std::cout << "grid " << ws.grid->size() << " poses, " << ws.graph.edges.size() << " edges; " << regions.size()
                << " regions, primary " << primary.size() << " poses, cost " << primary.mapping.total_path_cost << "\n";
      return kExitOk;
    }

    if (*update) {
      RegionFile rf = region_file_from_json(read_json_file(region_path));
      const Environment env = environment_from_json(read_json_file(env_path));
      if (env.revision() < rf.region.env_revision) {
        std::cerr << "environment revision " << env.revision() << " is older than the region's "
                  << rf.region.env_revision << "\n";
        return kExitUsage;
      }
      const Region next = update_region(rf.region, rf.workspace.model, env, rf.workspace.graph);
      write_json_file(out_path, region_file_json(next, rf.workspace, env));
      std::cout << "removed " << rf.region.size() - next.size() << " poses, " << next.size() << " remain\n";
      return kExitOk;
    }

    if (*validate) {
      const RegionFile rf = region_file_from_json(read_json_file(region_path));
      const TaskTrajectory demo = trajectory_from_json(read_json_file(demo_path));
      const auto ok = validate_demo(demo, rf.region, *rf.workspace.grid, threshold);
      std::size_t bad = 0;
      for (std::size_t i = 0; i < ok.size(); ++i) {
        if (!ok[i]) {
          std::cout << "sample " << i << " outside region\n";
          ++bad;
        }
      }
      std::cout << ok.size() - bad << "/" << ok.size() << " samples inside the region\n";
      return bad == 0 ? kExitOk : kExitNotReproducible;
    }

    if (*trainc) {
      const TaskTrajectory demo = trajectory_from_json(read_json_file(demo_path));
      write_json_file(out_path, to_json(train(demo, cdmp)));
      return kExitOk;
    }

    if (*reproducec) {
      if (cdmp_path.empty() == target_path.empty()) {
        std::cerr << "reproduce needs exactly one of --model or --target\n";
        return kExitUsage;
      }
      const RegionFile rf = region_file_from_json(read_json_file(region_path));
      TaskTrajectory target;
      if (!cdmp_path.empty()) {
        const CDMPModel m = cdmp_model_from_json(read_json_file(cdmp_path));
        const Pose g = goal.empty() ? m.goal_pose : parse_goal(goal, m.goal_pose);
        target = rollout(m, m.start_pose, g, tau > 0.0 ? tau : m.tau, dt);
      } else {
        target = trajectory_from_json(read_json_file(target_path));
      }
      ReproductionParams p = ReproductionParams::for_epsilon(rf.region.epsilon);
      p.k = rparams.k;
      if (max_step > 0.0) p.max_step = max_step;
      const Reproduction r = reproduce(target, rf.region, *rf.workspace.grid, rf.workspace.model, rf.env, p);
      json doc = to_json(r.trajectory, r.report);
      doc["target_trajectory"] = to_json(target);
      write_json_file(out_path, doc);
      print_report(r.report);
      return r.report.success ? kExitOk : kExitNotReproducible;
    }

    if (*servec || *replayc) {
      RegionFile rf = region_file_from_json(read_json_file(region_path));
      Environment env = env_path.empty() ? rf.env : environment_from_json(read_json_file(env_path));
      SessionConfig cfg;
      if (!store_dir.empty()) cfg.store_dir = store_dir;
      Session session(std::move(rf.workspace), std::move(env), std::move(rf.region), cfg);
      if (*replayc) {
        std::ifstream in(log_path);
        std::size_t n = 0;
        for (std::string line; std::getline(in, line);) {
          if (line.empty()) continue;
          session.handle_line(line);
          ++n;
        }
        std::cout << "replayed " << n << " messages\n";
        return kExitOk;
      }
      if (!log_path.empty()) sopts.log_path = log_path;
      sopts.stop = &g_stop;
      sopts.on_listening = [](int port) { std::cout << "listening on port " << port << std::endl; };
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      serve(session, sopts);
      return kExitOk;
    }

    if (*classifyc) {
      const RegionFile rf = region_file_from_json(read_json_file(region_path));
      const TaskGrid& grid = *rf.workspace.grid;
      const VoxelClassifier classifier(rf.workspace.model, grid, rf.env);
      std::map<std::string, std::size_t> counts;
      json poses = json::array();
      for (PoseIndex i = 0; i < grid.size(); ++i) {
        if (rf.region.contains(i)) continue;
        const VoxelClass c = classifier.classify(i);
        ++counts[to_string(c)];
        poses.push_back({{"pose_index", i},
                         {"p", vec_to_json(grid.pose(i).position)},
                         {"orientation_index", grid.unravel(i)[3]},
                         {"class", to_string(c)}});
      }
      write_json_file(out_path, {{"region_size", rf.region.size()}, {"counts", counts}, {"poses", poses}});
      for (const auto& [k, v] : counts) std::cout << k << " " << v << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
