#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "glfd/pose.hpp"

namespace glfd {

using PoseIndex = std::uint32_t;

/// Default rotation weight (m/rad) of the nearest-pose metric.
constexpr double kDefaultRotationWeight = 0.1;

/// Lattice of positions times a small orientation set. Pose index order is
/// x-major, then y, then z, then orientation.
class TaskGrid {
 public:
  TaskGrid() = default;

  const std::vector<Pose>& poses() const { return poses_; }
  const Pose& pose(PoseIndex i) const { return poses_[i]; }
  std::size_t size() const { return poses_.size(); }

  double position_spacing() const { return spacing_; }
  const std::vector<Eigen::Quaterniond>& orientation_set() const { return orientations_; }
  const Eigen::AlignedBox3d& bounds() const { return bounds_; }
  const std::array<int, 3>& lattice_counts() const { return counts_; }

  const Eigen::Vector3d& forward_axis(PoseIndex i) const { return forward_axes_[i]; }
  Eigen::Vector3d lattice_point(int ix, int iy, int iz) const;

  PoseIndex index(int ix, int iy, int iz, int io) const {
    return static_cast<PoseIndex>(
        ((static_cast<std::size_t>(ix) * counts_[1] + iy) * counts_[2] + iz) * orientations_.size() + io);
  }
  /// Inverse of index(): (ix, iy, iz, io).
  std::array<int, 4> unravel(PoseIndex i) const;

  /// Orientation-set entries whose rotation distance is within the smallest
  /// nonzero pairwise distance of the set.
  bool orientations_adjacent(int a, int b) const { return adjacency_[a][b]; }

  /// True iff p lies in the bounds grown by half a spacing on every side.
  bool covers(const Eigen::Vector3d& p) const;

 private:
  friend TaskGrid build_grid(const Eigen::AlignedBox3d&, double, const Eigen::Quaterniond&,
                             const std::vector<Eigen::Quaterniond>&);

  std::vector<Pose> poses_;
  std::vector<Eigen::Vector3d> forward_axes_;
  std::vector<Eigen::Quaterniond> orientations_;
  std::vector<std::vector<bool>> adjacency_;
  Eigen::AlignedBox3d bounds_;
  std::array<int, 3> counts_{0, 0, 0};
  double spacing_ = 0.0;
};

/// Offsets are world-frame rotations applied on top of the nominal
/// orientation: entry k of the orientation set is offsets[k-1] * nominal,
/// entry 0 is the nominal itself. Throws std::invalid_argument for spacing
/// <= 0 or empty bounds; an extent smaller than the spacing gives one layer.
TaskGrid build_grid(const Eigen::AlignedBox3d& bounds, double position_spacing,
                    const Eigen::Quaterniond& nominal_orientation,
                    const std::vector<Eigen::Quaterniond>& orientation_offsets);

/// Everything needed to rebuild a grid and its graph (the grid spec file).
struct GridSpec {
  Eigen::AlignedBox3d bounds;
  double position_spacing = 0.05;
  Eigen::Quaterniond nominal_orientation = Eigen::Quaterniond::Identity();
  std::vector<Eigen::Quaterniond> orientation_offsets;
  double ball_radius = 0.06;
};

TaskGrid build_grid(const GridSpec& spec);

struct TaskGraph {
  const TaskGrid* grid = nullptr;
  /// Undirected edges (i < j), sorted.
  std::vector<std::pair<PoseIndex, PoseIndex>> edges;
  /// Neighbors of each pose, ascending.
  std::vector<std::vector<PoseIndex>> adjacency;
  double ball_radius = 0.0;
};

/// Edges join poses of the same orientation whose positions are within
/// ball_radius, plus adjacent orientations at the same lattice point.
/// `grid` must outlive the graph.
TaskGraph build_graph(const TaskGrid& grid, double ball_radius);

/// Index minimizing position distance + w_rot * angular distance, ties to the
/// lowest index. Queries outside the bounds snap to the boundary layer.
PoseIndex nearest_pose(const TaskGrid& grid, const Pose& query,
                       double w_rot = kDefaultRotationWeight);

/// Same metric restricted to orientation-set entries with
/// allowed[io] == true; nullopt if none is allowed.
std::optional<PoseIndex> nearest_pose(const TaskGrid& grid, const Pose& query,
                                      const std::vector<bool>& allowed,
                                      double w_rot = kDefaultRotationWeight);

/// Dot product of the two tool forward (z) axes.
double orientation_similarity(const Pose& a, const Pose& b);

/// Convenience for orientation offsets: rotation of `angle` rad about the
/// world y axis.
Eigen::Quaterniond pitch_offset(double angle);

}  // namespace glfd
