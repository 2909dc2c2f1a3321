#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "glfd/collision.hpp"
#include "glfd/kinematics.hpp"
#include "glfd/taskspace.hpp"

namespace glfd {

constexpr double kDefaultEpsilon = 0.35;

struct PlannerParams {
  /// Bound on config_distance across any edge inside a region (rad).
  double epsilon = kDefaultEpsilon;
  int num_restarts = 8;
  int num_subspace_rounds = 3;
  /// Priority surcharge for growing through poses claimed by earlier rounds.
  double revisit_penalty = 1.0;
  std::uint64_t random_seed = 0;

  /// Throws std::invalid_argument unless epsilon > 0 and num_restarts >= 1.
  void validate() const;
};

/// One configuration per mapped pose, stored sorted by pose index.
struct GHAMapping {
  struct Entry {
    PoseIndex pose;
    JointConfig config;
  };
  std::vector<Entry> entries;
  double total_path_cost = 0.0;

  const JointConfig* find(PoseIndex pose) const;
  bool contains(PoseIndex pose) const { return find(pose) != nullptr; }
  std::size_t size() const { return entries.size(); }
};

struct Region {
  /// Sorted ascending; same order as mapping.entries.
  std::vector<PoseIndex> pose_indices;
  GHAMapping mapping;
  double epsilon = kDefaultEpsilon;
  std::uint64_t env_revision = 0;
  std::uint64_t graph_ref = 0;

  bool contains(PoseIndex pose) const;
  std::size_t size() const { return pose_indices.size(); }
  bool empty() const { return pose_indices.empty(); }
};

/// Valid (in-limit, collision-free) configurations per grid pose. The planner
/// core only sees this table, so any arm that can fill it can be planned for.
struct CandidateTable {
  std::vector<std::vector<JointConfig>> per_pose;
};

CandidateTable build_candidates(const ArmModel& model, const Environment& env, const TaskGrid& grid);

/// Content hash identifying a grid + graph specification.
std::uint64_t graph_hash(const TaskGrid& grid, double ball_radius);

/// Seeded priority-first growth over the task graph. Each restart grows one
/// mapping from a seed pose: a frontier pose takes the candidate that
/// minimizes the largest config_distance to its already-mapped neighbors and
/// is accepted only if that distance is <= epsilon. Among restarts, the
/// largest region wins, then the lowest total path cost. Later rounds may
/// grow through poses claimed earlier (at revisit_penalty) but only keep
/// unclaimed poses, restricted to their largest connected piece.
std::vector<Region> plan_regions(const CandidateTable& candidates, const TaskGraph& graph,
                                 const PlannerParams& params, std::uint64_t env_revision = 0,
                                 std::uint64_t graph_ref = 0);

std::vector<Region> plan_regions(const ArmModel& model, const Environment& env, const TaskGraph& graph,
                                 const PlannerParams& params);

/// Largest region; ties go to the lower total path cost, then list order.
/// Throws std::invalid_argument on an empty list.
const Region& select_primary_region(const std::vector<Region>& regions);

/// Drops mapped configurations that now collide (or leave the limits), then
/// keeps the largest connected component. Never adds poses or changes the
/// surviving configurations.
Region update_region(const Region& region, const ArmModel& model, const Environment& env,
                     const TaskGraph& graph);

/// config_distance between the endpoint configurations. Throws
/// std::invalid_argument if either endpoint is unmapped.
double edge_cost(const GHAMapping& mapping, std::pair<PoseIndex, PoseIndex> edge);

/// Sum of edge_cost over graph edges with both endpoints mapped.
double total_cost(const GHAMapping& mapping, const TaskGraph& graph);

/// Builds a region from pose-sorted entries, computing the path cost.
Region make_region(std::vector<GHAMapping::Entry> entries, const TaskGraph& graph, double epsilon,
                   std::uint64_t env_revision, std::uint64_t graph_ref);

/// Connected components of the subgraph induced by `members` (sorted),
/// largest first; ties by smallest pose index.
std::vector<std::vector<PoseIndex>> connected_components(const std::vector<PoseIndex>& members,
                                                         const TaskGraph& graph);

}  // namespace glfd
