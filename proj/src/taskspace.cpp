#include "glfd/taskspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace glfd {

Eigen::Vector3d TaskGrid::lattice_point(int ix, int iy, int iz) const {
  const Eigen::Vector3d lo = bounds_.min();
  return Eigen::Vector3d(lo.x() + ix * spacing_, lo.y() + iy * spacing_, lo.z() + iz * spacing_);
}

std::array<int, 4> TaskGrid::unravel(PoseIndex i) const {
  const std::size_t no = orientations_.size();
  std::size_t rest = i;
  const int io = static_cast<int>(rest % no);
  rest /= no;
  const int iz = static_cast<int>(rest % counts_[2]);
  rest /= counts_[2];
  const int iy = static_cast<int>(rest % counts_[1]);
  rest /= counts_[1];
  return {static_cast<int>(rest), iy, iz, io};
}

bool TaskGrid::covers(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d half = Eigen::Vector3d::Constant(0.5 * spacing_);
  return (p.array() >= (bounds_.min() - half).array()).all() &&
         (p.array() <= (bounds_.max() + half).array()).all();
}

TaskGrid build_grid(const Eigen::AlignedBox3d& bounds, double position_spacing,
                    const Eigen::Quaterniond& nominal_orientation,
                    const std::vector<Eigen::Quaterniond>& orientation_offsets) {
  if (!(position_spacing > 0.0)) throw std::invalid_argument("position spacing must be positive");
  if (bounds.isEmpty()) throw std::invalid_argument("grid bounds are empty");

  TaskGrid g;
  g.spacing_ = position_spacing;
  g.bounds_ = bounds;
  const Eigen::Vector3d extent = bounds.max() - bounds.min();
  for (int k = 0; k < 3; ++k) {
    g.counts_[k] = static_cast<int>(std::floor(extent[k] / position_spacing + 1e-9)) + 1;
  }

  g.orientations_.push_back(nominal_orientation.normalized());
  for (const auto& off : orientation_offsets) {
    g.orientations_.push_back((off.normalized() * nominal_orientation.normalized()).normalized());
  }

  const std::size_t no = g.orientations_.size();
  double min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < no; ++a) {
    for (std::size_t b = a + 1; b < no; ++b) {
      const double d = angular_distance(g.orientations_[a], g.orientations_[b]);
      if (d > 1e-12) min_sep = std::min(min_sep, d);
    }
  }
  g.adjacency_.assign(no, std::vector<bool>(no, false));
  for (std::size_t a = 0; a < no; ++a) {
    for (std::size_t b = 0; b < no; ++b) {
      if (a == b) continue;
      const double d = angular_distance(g.orientations_[a], g.orientations_[b]);
      g.adjacency_[a][b] = d <= min_sep * (1.0 + 1e-9);
    }
  }

  const std::size_t n = static_cast<std::size_t>(g.counts_[0]) * g.counts_[1] * g.counts_[2] * no;
  g.poses_.reserve(n);
  g.forward_axes_.reserve(n);
  for (int ix = 0; ix < g.counts_[0]; ++ix) {
    for (int iy = 0; iy < g.counts_[1]; ++iy) {
      for (int iz = 0; iz < g.counts_[2]; ++iz) {
        const Eigen::Vector3d p = g.lattice_point(ix, iy, iz);
        for (std::size_t io = 0; io < no; ++io) {
          g.poses_.emplace_back(p, g.orientations_[io]);
          g.forward_axes_.push_back(g.poses_.back().forward_axis());
        }
      }
    }
  }
  return g;
}

TaskGrid build_grid(const GridSpec& spec) {
  return build_grid(spec.bounds, spec.position_spacing, spec.nominal_orientation, spec.orientation_offsets);
}

TaskGraph build_graph(const TaskGrid& grid, double ball_radius) {
  if (!(ball_radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  TaskGraph graph;
  graph.grid = &grid;
  graph.ball_radius = ball_radius;

  const auto& n = grid.lattice_counts();
  const int no = static_cast<int>(grid.orientation_set().size());
  const int reach = static_cast<int>(std::ceil(ball_radius / grid.position_spacing())) + 1;

  for (int ix = 0; ix < n[0]; ++ix) {
    for (int iy = 0; iy < n[1]; ++iy) {
      for (int iz = 0; iz < n[2]; ++iz) {
        const Eigen::Vector3d p = grid.lattice_point(ix, iy, iz);
        for (int dx = 0; dx <= reach; ++dx) {
          const int jx = ix + dx;
          if (jx >= n[0]) break;
          for (int dy = -reach; dy <= reach; ++dy) {
            const int jy = iy + dy;
            if (jy < 0 || jy >= n[1]) continue;
            for (int dz = -reach; dz <= reach; ++dz) {
              const int jz = iz + dz;
              if (jz < 0 || jz >= n[2]) continue;
              // visit each unordered lattice pair once
              if (dx == 0 && (dy < 0 || (dy == 0 && dz < 0))) continue;
              if ((grid.lattice_point(jx, jy, jz) - p).norm() > ball_radius) continue;
              const bool same_point = dx == 0 && dy == 0 && dz == 0;
              for (int a = 0; a < no; ++a) {
                for (int b = 0; b < no; ++b) {
                  if (same_point && b <= a) continue;
                  if (a != b && (!same_point || !grid.orientations_adjacent(a, b))) continue;
                  PoseIndex i = grid.index(ix, iy, iz, a);
                  PoseIndex j = grid.index(jx, jy, jz, b);
                  if (i > j) std::swap(i, j);
                  graph.edges.emplace_back(i, j);
                }
              }
            }
          }
        }
      }
    }
  }
  std::sort(graph.edges.begin(), graph.edges.end());
  graph.edges.erase(std::unique(graph.edges.begin(), graph.edges.end()), graph.edges.end());

  graph.adjacency.assign(grid.size(), {});
  for (const auto& [i, j] : graph.edges) {
    graph.adjacency[i].push_back(j);
    graph.adjacency[j].push_back(i);
  }
  for (auto& nb : graph.adjacency) std::sort(nb.begin(), nb.end());
  return graph;
}

std::optional<PoseIndex> nearest_pose(const TaskGrid& grid, const Pose& query,
                                      const std::vector<bool>& allowed, double w_rot) {
  const auto& n = grid.lattice_counts();
  const Eigen::Vector3d lo = grid.bounds().min();
  std::array<std::array<int, 2>, 3> cand;
  for (int k = 0; k < 3; ++k) {
    const double f = (query.position[k] - lo[k]) / grid.position_spacing();
    const int i0 = std::clamp(static_cast<int>(std::floor(f)), 0, n[k] - 1);
    cand[k] = {i0, std::min(i0 + 1, n[k] - 1)};
  }
  // Orientation term is independent of position; still evaluate the full
  // metric on the 2x2x2 candidate block so ties resolve exactly as a linear
  // scan would.
  const std::size_t no = grid.orientation_set().size();
  std::vector<double> ang(no);
  for (std::size_t io = 0; io < no; ++io) {
    const auto& q = grid.pose(grid.index(0, 0, 0, static_cast<int>(io))).orientation;
    ang[io] = w_rot * angular_distance(query.orientation, q);
  }
  std::optional<PoseIndex> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int ax : cand[0]) {
    for (int ay : cand[1]) {
      for (int az : cand[2]) {
        const double dp = (query.position - grid.lattice_point(ax, ay, az)).norm();
        for (std::size_t io = 0; io < no; ++io) {
          if (!allowed[io]) continue;
          const double d = dp + ang[io];
          const PoseIndex idx = grid.index(ax, ay, az, static_cast<int>(io));
          if (!best || d < best_d || (d == best_d && idx < *best)) {
            best_d = d;
            best = idx;
          }
        }
      }
    }
  }
  return best;
}

PoseIndex nearest_pose(const TaskGrid& grid, const Pose& query, double w_rot) {
  return *nearest_pose(grid, query, std::vector<bool>(grid.orientation_set().size(), true), w_rot);
}

double orientation_similarity(const Pose& a, const Pose& b) {
  return std::clamp(a.forward_axis().dot(b.forward_axis()), -1.0, 1.0);
}

Eigen::Quaterniond pitch_offset(double angle) {
  return axis_angle(Eigen::Vector3d::UnitY(), angle);
}

}  // namespace glfd
