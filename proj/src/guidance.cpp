#include "glfd/guidance.hpp"

#include <algorithm>
#include <stdexcept>

namespace glfd {

namespace {

constexpr std::uint8_t kUnknown = 0xff;

VoxelClass classify_raw(PoseIndex pose, const TaskGrid& grid, const ArmModel& model, const Environment& env) {
  const auto sols = analytic_ik(model, grid.pose(pose));
  if (sols.empty()) return VoxelClass::unreachable;
  for (const auto& q : sols) {
    if (within_limits(model, q) && !in_collision(model, q, env)) return VoxelClass::large_config_change;
  }
  return VoxelClass::collision_all_ik;
}

}  // namespace

const char* to_string(VoxelClass c) {
  switch (c) {
    case VoxelClass::collision_all_ik:
      return "collision_all_ik";
    case VoxelClass::large_config_change:
      return "large_config_change";
    case VoxelClass::unreachable:
      return "unreachable";
  }
  return "unreachable";
}

VoxelClass voxel_class_from_string(const std::string& name) {
  if (name == "collision_all_ik") return VoxelClass::collision_all_ik;
  if (name == "large_config_change") return VoxelClass::large_config_change;
  if (name == "unreachable") return VoxelClass::unreachable;
  throw std::invalid_argument("unknown voxel class: " + name);
}

void GuidanceParams::validate() const {
  if (!(similarity_threshold > -1.0 && similarity_threshold <= 1.0)) {
    throw std::invalid_argument("similarity_threshold must lie in (-1, 1]");
  }
  if (!(opacity_near_distance > 0.0)) throw std::invalid_argument("opacity_near_distance must be positive");
  if (!(overhead_clear_radius >= 0.0)) throw std::invalid_argument("overhead_clear_radius must be non-negative");
}

VoxelClass classify_voxel(PoseIndex pose, const TaskGrid& grid, const ArmModel& model, const Environment& env,
                          const Region& region) {
  if (pose >= grid.size()) throw std::invalid_argument("pose index out of range");
  if (region.contains(pose)) throw std::invalid_argument("pose is a region member");
  return classify_raw(pose, grid, model, env);
}

VoxelClassifier::VoxelClassifier(const ArmModel& model, const TaskGrid& grid, Environment env)
    : model_(&model), grid_(&grid), env_(std::move(env)),
      cache_(new std::atomic<std::uint8_t>[grid.size()]) {
  for (std::size_t i = 0; i < grid.size(); ++i) cache_[i].store(kUnknown, std::memory_order_relaxed);
}

VoxelClass VoxelClassifier::classify(PoseIndex pose) const {
  const std::uint8_t c = cache_[pose].load(std::memory_order_relaxed);
  if (c != kUnknown) return static_cast<VoxelClass>(c);
  const VoxelClass v = classify_raw(pose, *grid_, *model_, env_);
  cache_[pose].store(static_cast<std::uint8_t>(v), std::memory_order_relaxed);
  return v;
}

void VoxelClassifier::warm(const Region& region) const {
  for (PoseIndex i = 0; i < grid_->size(); ++i) {
    if (!region.contains(i)) classify(i);
  }
}

double voxel_opacity(double distance, double near_distance) {
  if (distance <= near_distance) return 1.0;
  if (distance >= 3.0 * near_distance) return 0.25;
  return 1.0 - 0.75 * (distance - near_distance) / (2.0 * near_distance);
}

GuidanceFrame blocked_voxels(const TaskGrid& grid, const Region& region, const ToolPose& tool,
                             const GuidanceParams& params, const VoxelClassifier& classifier) {
  params.validate();
  GuidanceFrame frame;
  frame.tool = tool;
  frame.region_revision = region.env_revision;

  const std::size_t no = grid.orientation_set().size();
  std::vector<int> gated;
  for (std::size_t io = 0; io < no; ++io) {
    if (orientation_similarity(tool.pose, grid.pose(static_cast<PoseIndex>(io))) >= params.similarity_threshold) {
      gated.push_back(static_cast<int>(io));
    }
  }
  if (gated.empty()) return frame;

  const Eigen::Vector3d& tp = tool.pose.position;
  const double r2 = params.overhead_clear_radius * params.overhead_clear_radius;
  const auto& n = grid.lattice_counts();
  for (int ix = 0; ix < n[0]; ++ix) {
    for (int iy = 0; iy < n[1]; ++iy) {
      for (int iz = 0; iz < n[2]; ++iz) {
        const Eigen::Vector3d p = grid.lattice_point(ix, iy, iz);
        const Eigen::Vector2d lateral = (p - tp).head<2>();
        if (p.z() > tp.z() && lateral.squaredNorm() <= r2) continue;
        const double opacity = voxel_opacity((p - tp).norm(), params.opacity_near_distance);
        for (int io : gated) {
          const PoseIndex idx = grid.index(ix, iy, iz, io);
          if (region.contains(idx)) continue;
          frame.blocked.push_back({idx, classifier.classify(idx), opacity});
        }
      }
    }
  }
  return frame;
}

GuidanceFrame blocked_voxels(const TaskGrid& grid, const Region& region, const ToolPose& tool,
                             const GuidanceParams& params, const ArmModel& model, const Environment& env) {
  return blocked_voxels(grid, region, tool, params, VoxelClassifier(model, grid, env));
}

FrameDiff frame_diff(const GuidanceFrame& prev, const GuidanceFrame& next) {
  if (prev.region_revision != next.region_revision) {
    throw std::invalid_argument("frames belong to different region revisions");
  }
  FrameDiff d;
  d.region_revision = next.region_revision;
  d.tool = next.tool;
  auto a = prev.blocked.begin(), b = next.blocked.begin();
  while (a != prev.blocked.end() || b != next.blocked.end()) {
    if (b == next.blocked.end() || (a != prev.blocked.end() && a->pose_index < b->pose_index)) {
      d.removed.push_back((a++)->pose_index);
    } else if (a == prev.blocked.end() || b->pose_index < a->pose_index) {
      d.added.push_back(*b++);
    } else {
      if (a->cls != b->cls) {
        d.removed.push_back(a->pose_index);
        d.added.push_back(*b);
      } else if (a->opacity != b->opacity) {
        d.changed_opacity.emplace_back(b->pose_index, b->opacity);
      }
      ++a;
      ++b;
    }
  }
  return d;
}

GuidanceFrame apply_diff(const GuidanceFrame& prev, const FrameDiff& diff) {
  if (prev.region_revision != diff.region_revision) {
    throw std::invalid_argument("diff belongs to a different region revision");
  }
  GuidanceFrame out;
  out.region_revision = diff.region_revision;
  out.tool = diff.tool;
  std::vector<PoseIndex> removed = diff.removed;
  std::sort(removed.begin(), removed.end());
  for (const auto& v : prev.blocked) {
    if (!std::binary_search(removed.begin(), removed.end(), v.pose_index)) out.blocked.push_back(v);
  }
  out.blocked.insert(out.blocked.end(), diff.added.begin(), diff.added.end());
  std::sort(out.blocked.begin(), out.blocked.end(),
            [](const BlockedVoxel& x, const BlockedVoxel& y) { return x.pose_index < y.pose_index; });
  for (const auto& [idx, op] : diff.changed_opacity) {
    auto it = std::lower_bound(out.blocked.begin(), out.blocked.end(), idx,
                               [](const BlockedVoxel& v, PoseIndex p) { return v.pose_index < p; });
    if (it == out.blocked.end() || it->pose_index != idx) {
      throw std::invalid_argument("diff changes opacity of a voxel that is not blocked");
    }
    it->opacity = op;
  }
  return out;
}

}  // namespace glfd
