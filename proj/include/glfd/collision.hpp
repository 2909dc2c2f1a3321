#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "glfd/kinematics.hpp"
#include "glfd/pose.hpp"

namespace glfd {

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

struct Capsule {
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

/// Oriented box: center pose and half extents along the box axes.
struct Box {
  Pose pose;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
};

using Shape = std::variant<Box, Sphere, Capsule>;

/// Contact tolerance: solids at distance <= this are in collision.
constexpr double kContactTolerance = 1e-9;

/// Throws std::invalid_argument for non-positive radii or half extents.
void validate_shape(const Shape& shape);

/// Separation distance between the solids, 0 when they overlap. Box-box
/// pairs only resolve overlap: 0 or +infinity.
double shape_distance(const Shape& a, const Shape& b);

/// True iff the minimum distance between the two solids is <= 0 (within
/// kContactTolerance). Symmetric in its arguments.
bool shape_pair_collides(const Shape& a, const Shape& b);

/// Static fixtures plus named dynamic objects. Values are immutable
/// snapshots: add/remove return a new environment with revision + 1.
class Environment {
 public:
  Environment() = default;
  explicit Environment(std::vector<Shape> static_shapes, std::uint64_t revision = 0);

  const std::vector<Shape>& static_shapes() const { return static_shapes_; }
  const std::map<std::string, Shape>& dynamic_objects() const { return dynamic_; }
  std::uint64_t revision() const { return revision_; }

  /// Throws std::invalid_argument if `id` already exists.
  Environment add_object(const std::string& id, const Shape& shape) const;
  /// Throws std::invalid_argument if `id` is unknown.
  Environment remove_object(const std::string& id) const;

  /// Static shapes followed by dynamic objects in id order.
  std::vector<Shape> all_shapes() const;

 private:
  std::vector<Shape> static_shapes_;
  std::map<std::string, Shape> dynamic_;
  std::uint64_t revision_ = 0;
};

Environment add_object(const Environment& env, const std::string& id, const Shape& shape);
Environment remove_object(const Environment& env, const std::string& id);

struct PosedCapsule {
  int frame = 0;
  Capsule capsule;
};

/// Link capsules transformed into the world frame for `config`.
std::vector<PosedCapsule> posed_capsules(const ArmModel& model, const JointConfig& config);

/// True iff any link capsule touches an environment shape, or any pair of
/// capsules on non-adjacent frames touches (self-collision).
bool in_collision(const ArmModel& model, const JointConfig& config, const Environment& env);

}  // namespace glfd
