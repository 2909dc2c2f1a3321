#include "glfd/region_planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>
#include <tuple>

namespace glfd {

void PlannerParams::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (num_restarts < 1) throw std::invalid_argument("num_restarts must be at least 1");
  if (num_subspace_rounds < 1) throw std::invalid_argument("num_subspace_rounds must be at least 1");
  if (!(revisit_penalty >= 0.0)) throw std::invalid_argument("revisit_penalty must be non-negative");
}

const JointConfig* GHAMapping::find(PoseIndex pose) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), pose,
                             [](const Entry& e, PoseIndex p) { return e.pose < p; });
  if (it == entries.end() || it->pose != pose) return nullptr;
  return &it->config;
}

bool Region::contains(PoseIndex pose) const {
  return std::binary_search(pose_indices.begin(), pose_indices.end(), pose);
}

CandidateTable build_candidates(const ArmModel& model, const Environment& env, const TaskGrid& grid) {
  CandidateTable table;
  table.per_pose.resize(grid.size());
  for (PoseIndex i = 0; i < grid.size(); ++i) {
    for (const auto& q : analytic_ik(model, grid.pose(i))) {
      if (within_limits(model, q) && !in_collision(model, q, env)) table.per_pose[i].push_back(q);
    }
  }
  return table;
}

std::uint64_t graph_hash(const TaskGrid& grid, double ball_radius) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffu;
      h *= 1099511628211ULL;
    }
  };
  for (int k = 0; k < 3; ++k) mix(grid.bounds().min()[k]);
  for (int k = 0; k < 3; ++k) mix(grid.bounds().max()[k]);
  mix(grid.position_spacing());
  for (const auto& q : grid.orientation_set()) {
    mix(q.w());
    mix(q.x());
    mix(q.y());
    mix(q.z());
  }
  mix(ball_radius);
  return h;
}

double edge_cost(const GHAMapping& mapping, std::pair<PoseIndex, PoseIndex> edge) {
  const JointConfig* a = mapping.find(edge.first);
  const JointConfig* b = mapping.find(edge.second);
  if (!a || !b) throw std::invalid_argument("edge_cost: edge endpoint is not mapped");
  return config_distance(*a, *b);
}

double total_cost(const GHAMapping& mapping, const TaskGraph& graph) {
  double sum = 0.0;
  for (const auto& e : mapping.entries) {
    for (PoseIndex n : graph.adjacency[e.pose]) {
      if (n <= e.pose) continue;
      if (const JointConfig* other = mapping.find(n)) sum += config_distance(e.config, *other);
    }
  }
  return sum;
}

Region make_region(std::vector<GHAMapping::Entry> entries, const TaskGraph& graph, double epsilon,
                   std::uint64_t env_revision, std::uint64_t graph_ref) {
  std::sort(entries.begin(), entries.end(),
            [](const GHAMapping::Entry& a, const GHAMapping::Entry& b) { return a.pose < b.pose; });
  Region r;
  r.mapping.entries = std::move(entries);
  r.mapping.total_path_cost = total_cost(r.mapping, graph);
  r.pose_indices.reserve(r.mapping.entries.size());
  for (const auto& e : r.mapping.entries) r.pose_indices.push_back(e.pose);
  r.epsilon = epsilon;
  r.env_revision = env_revision;
  r.graph_ref = graph_ref;
  return r;
}

std::vector<std::vector<PoseIndex>> connected_components(const std::vector<PoseIndex>& members,
                                                         const TaskGraph& graph) {
  std::vector<char> in(graph.adjacency.size(), 0), seen(graph.adjacency.size(), 0);
  for (PoseIndex p : members) in[p] = 1;
  std::vector<std::vector<PoseIndex>> comps;
  for (PoseIndex start : members) {
    if (seen[start]) continue;
    std::vector<PoseIndex> comp{start};
    seen[start] = 1;
    for (std::size_t k = 0; k < comp.size(); ++k) {
      for (PoseIndex n : graph.adjacency[comp[k]]) {
        if (in[n] && !seen[n]) {
          seen[n] = 1;
          comp.push_back(n);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  std::stable_sort(comps.begin(), comps.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return comps;
}

namespace {

struct GrowResult {
  std::vector<GHAMapping::Entry> entries;  // region entries, pose-sorted
  double cost = 0.0;
};

class Grower {
 public:
  Grower(const CandidateTable& cand, const TaskGraph& graph, const PlannerParams& params,
         const std::vector<char>& claimed)
      : cand_(cand), graph_(graph), params_(params), claimed_(claimed) {}

  GrowResult grow(PoseIndex seed, int seed_solution) {
    const std::size_t n = graph_.adjacency.size();
    chosen_.assign(n, -1);
    closed_.assign(n, 0);
    std::vector<PoseIndex> mapped;
    using Item = std::pair<double, PoseIndex>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;

    auto assign = [&](PoseIndex p, int s) {
      chosen_[p] = s;
      mapped.push_back(p);
      for (PoseIndex nb : graph_.adjacency[p]) {
        if (chosen_[nb] >= 0 || closed_[nb] || cand_.per_pose[nb].empty()) continue;
        const auto [cost, sol] = evaluate(nb);
        if (sol < 0) {
          closed_[nb] = 1;
          continue;
        }
        frontier.emplace(cost + surcharge(nb), nb);
      }
    };

    assign(seed, seed_solution);
    while (!frontier.empty()) {
      const auto [prio, p] = frontier.top();
      frontier.pop();
      if (chosen_[p] >= 0 || closed_[p]) continue;
      const auto [cost, sol] = evaluate(p);
      if (sol < 0) {
        // more mapped neighbors only tighten the constraint; never feasible again
        closed_[p] = 1;
        continue;
      }
      const double now = cost + surcharge(p);
      if (now > prio) {
        frontier.emplace(now, p);
        continue;
      }
      assign(p, sol);
    }

    // Keep unclaimed poses only, then their largest connected piece.
    std::vector<PoseIndex> fresh;
    for (PoseIndex p : mapped) {
      if (!claimed_[p]) fresh.push_back(p);
    }
    std::sort(fresh.begin(), fresh.end());
    GrowResult out;
    if (fresh.empty()) return out;
    std::vector<PoseIndex> keep = fresh;
    if (fresh.size() != mapped.size()) keep = connected_components(fresh, graph_).front();

    std::vector<char> in(n, 0);
    for (PoseIndex p : keep) in[p] = 1;
    out.entries.reserve(keep.size());
    for (PoseIndex p : keep) {
      const JointConfig& q = cand_.per_pose[p][chosen_[p]];
      out.entries.push_back({p, q});
      for (PoseIndex nb : graph_.adjacency[p]) {
        if (nb > p && in[nb]) out.cost += config_distance(q, cand_.per_pose[nb][chosen_[nb]]);
      }
    }
    return out;
  }

 private:
  double surcharge(PoseIndex p) const { return claimed_[p] ? params_.revisit_penalty : 0.0; }

  // Candidate minimizing the largest distance to mapped neighbors; solution
  // index -1 when none is within epsilon.
  std::pair<double, int> evaluate(PoseIndex p) const {
    const auto& sols = cand_.per_pose[p];
    double best = std::numeric_limits<double>::infinity();
    int best_s = -1;
    for (int s = 0; s < static_cast<int>(sols.size()); ++s) {
      double worst = 0.0;
      for (PoseIndex nb : graph_.adjacency[p]) {
        if (chosen_[nb] < 0) continue;
        worst = std::max(worst, config_distance(sols[s], cand_.per_pose[nb][chosen_[nb]]));
        if (worst >= best) break;
      }
      if (worst < best) {
        best = worst;
        best_s = s;
      }
    }
    if (best > params_.epsilon) return {best, -1};
    return {best, best_s};
  }

  const CandidateTable& cand_;
  const TaskGraph& graph_;
  const PlannerParams& params_;
  const std::vector<char>& claimed_;
  std::vector<int> chosen_;
  std::vector<char> closed_;
};

bool better(const GrowResult& a, const GrowResult& b) {
  if (a.entries.size() != b.entries.size()) return a.entries.size() > b.entries.size();
  return a.cost < b.cost;
}

// Weighted sampling without replacement (Efraimidis-Spirakis keys), weight =
// number of valid configurations. Uses raw engine bits so the draw is
// identical across standard library implementations.
std::vector<PoseIndex> draw_seeds(const CandidateTable& cand, const std::vector<char>& claimed, int count,
                                  std::mt19937_64& rng) {
  std::vector<std::pair<double, PoseIndex>> keyed;
  for (PoseIndex p = 0; p < cand.per_pose.size(); ++p) {
    const double w = static_cast<double>(cand.per_pose[p].size());
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    if (w == 0.0 || claimed[p]) continue;
    keyed.emplace_back(std::log(u) / w, p);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<PoseIndex> seeds;
  for (int k = 0; k < count && k < static_cast<int>(keyed.size()); ++k) seeds.push_back(keyed[k].second);
  return seeds;
}

}  // namespace

std::vector<Region> plan_regions(const CandidateTable& candidates, const TaskGraph& graph,
                                 const PlannerParams& params, std::uint64_t env_revision,
                                 std::uint64_t graph_ref) {
  params.validate();
  if (candidates.per_pose.size() != graph.adjacency.size()) {
    throw std::invalid_argument("candidate table does not match the graph");
  }
  std::mt19937_64 rng(params.random_seed);
  std::vector<char> claimed(graph.adjacency.size(), 0);
  std::vector<Region> regions;

  for (int round = 0; round < params.num_subspace_rounds; ++round) {
    const auto seeds = draw_seeds(candidates, claimed, params.num_restarts, rng);
    if (seeds.empty()) break;
    Grower grower(candidates, graph, params, claimed);
    std::optional<GrowResult> best;
    for (PoseIndex seed : seeds) {
      for (int s = 0; s < static_cast<int>(candidates.per_pose[seed].size()); ++s) {
        GrowResult r = grower.grow(seed, s);
        if (!best || better(r, *best)) best = std::move(r);
      }
    }
    if (!best || best->entries.empty()) break;
    for (const auto& e : best->entries) claimed[e.pose] = 1;
    regions.push_back(make_region(std::move(best->entries), graph, params.epsilon, env_revision, graph_ref));
  }
  return regions;
}

std::vector<Region> plan_regions(const ArmModel& model, const Environment& env, const TaskGraph& graph,
                                 const PlannerParams& params) {
  if (!graph.grid || graph.grid->size() == 0) throw std::invalid_argument("plan_regions: empty graph");
  const CandidateTable cand = build_candidates(model, env, *graph.grid);
  return plan_regions(cand, graph, params, env.revision(), graph_hash(*graph.grid, graph.ball_radius));
}

const Region& select_primary_region(const std::vector<Region>& regions) {
  if (regions.empty()) throw std::invalid_argument("select_primary_region: no regions");
  std::size_t best = 0;
  for (std::size_t i = 1; i < regions.size(); ++i) {
    const auto& a = regions[i];
    const auto& b = regions[best];
    if (a.size() > b.size() || (a.size() == b.size() && a.mapping.total_path_cost < b.mapping.total_path_cost)) {
      best = i;
    }
  }
  return regions[best];
}

Region update_region(const Region& region, const ArmModel& model, const Environment& env,
                     const TaskGraph& graph) {
  std::vector<GHAMapping::Entry> alive;
  for (const auto& e : region.mapping.entries) {
    if (within_limits(model, e.config) && !in_collision(model, e.config, env)) alive.push_back(e);
  }
  std::vector<PoseIndex> members;
  for (const auto& e : alive) members.push_back(e.pose);
  std::vector<GHAMapping::Entry> kept;
  if (!members.empty()) {
    const auto comps = connected_components(members, graph);
    const auto& keep = comps.front();
    std::size_t k = 0;
    for (const auto& e : alive) {
      while (k < keep.size() && keep[k] < e.pose) ++k;
      if (k < keep.size() && keep[k] == e.pose) kept.push_back(e);
    }
  }
  return make_region(std::move(kept), graph, region.epsilon, env.revision(), region.graph_ref);
}

}  // namespace glfd
