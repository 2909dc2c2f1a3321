#include "glfd/reproduction.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace glfd {

void ReproductionParams::validate() const {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
}

namespace {

// The k region entries nearest to `query` under position + w_rot * angle.
std::vector<const JointConfig*> nearest_mapped(const Region& region, const TaskGrid& grid, const Pose& query,
                                               int k, double w_rot) {
  const auto& ori = grid.orientation_set();
  std::vector<double> ang(ori.size());
  for (std::size_t io = 0; io < ori.size(); ++io) {
    ang[io] = w_rot * angular_distance(query.orientation, grid.pose(static_cast<PoseIndex>(io)).orientation);
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(region.mapping.entries.size());
  const std::size_t no = ori.size();
  for (std::size_t e = 0; e < region.mapping.entries.size(); ++e) {
    const PoseIndex idx = region.mapping.entries[e].pose;
    scored.emplace_back((grid.pose(idx).position - query.position).norm() + ang[idx % no], e);
  }
  const std::size_t kk = std::min<std::size_t>(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + kk, scored.end());
  std::vector<const JointConfig*> out;
  for (std::size_t i = 0; i < kk; ++i) out.push_back(&region.mapping.entries[scored[i].second].config);
  return out;
}

}  // namespace

Reproduction reproduce(const TaskTrajectory& traj, const Region& region, const TaskGrid& grid,
                       const ArmModel& model, const Environment& env, const ReproductionParams& params) {
  params.validate();
  if (region.empty()) throw std::invalid_argument("cannot reproduce against an empty region");

  Reproduction out;
  auto& rep = out.report;
  out.trajectory.samples.reserve(traj.samples.size());
  const JointConfig* prev = nullptr;
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const Pose& x = traj.samples[i].pose;
    if (!grid.covers(x.position) || !region.contains(nearest_pose(grid, x, params.w_rot))) {
      rep.out_of_region_samples.push_back(i);
    }
    const auto near = nearest_mapped(region, grid, x, params.k, params.w_rot);
    const auto sols = analytic_ik(model, x);

    JointConfig chosen;
    if (sols.empty()) {
      rep.unreachable_samples.push_back(i);
      chosen = prev ? *prev : *near.front();
    } else {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_i = 0;
      for (std::size_t s = 0; s < sols.size(); ++s) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto* c : near) d = std::min(d, config_distance(sols[s], *c));
        if (d < best) {
          best = d;
          best_i = s;
        }
      }
      chosen = sols[best_i];
      if (!within_limits(model, chosen) || in_collision(model, chosen, env)) rep.collision_samples.push_back(i);
    }
    if (prev) rep.max_joint_jump = std::max(rep.max_joint_jump, config_distance(*prev, chosen));
    out.trajectory.samples.push_back({traj.samples[i].t, chosen});
    prev = &out.trajectory.samples.back().config;
  }
  rep.success = rep.out_of_region_samples.empty() && rep.collision_samples.empty() &&
                rep.unreachable_samples.empty() && rep.max_joint_jump <= params.max_step;
  return out;
}

std::vector<bool> validate_demo(const TaskTrajectory& traj, const Region& region, const TaskGrid& grid,
                                double similarity_threshold, double w_rot) {
  const std::size_t no = grid.orientation_set().size();
  std::vector<bool> ok;
  ok.reserve(traj.samples.size());
  for (const auto& smp : traj.samples) {
    if (!grid.covers(smp.pose.position)) {
      ok.push_back(false);
      continue;
    }
    std::vector<bool> allowed(no);
    for (std::size_t io = 0; io < no; ++io) {
      allowed[io] = orientation_similarity(smp.pose, grid.pose(static_cast<PoseIndex>(io))) >= similarity_threshold;
    }
    const auto idx = nearest_pose(grid, smp.pose, allowed, w_rot);
    ok.push_back(idx && region.contains(*idx));
  }
  return ok;
}

}  // namespace glfd
