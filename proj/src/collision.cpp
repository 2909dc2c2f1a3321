#include "glfd/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace glfd {

namespace {

using Eigen::Vector3d;

double point_segment_distance(const Vector3d& p, const Vector3d& a, const Vector3d& b) {
  const Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Closest points between segments p1q1 and p2q2 (Ericson, Real-Time
// Collision Detection, 5.1.9).
double segment_segment_distance(const Vector3d& p1, const Vector3d& q1, const Vector3d& p2,
                                const Vector3d& q2) {
  constexpr double eps = 1e-15;
  const Vector3d d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (a <= eps && e <= eps) return r.norm();
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

Vector3d to_box_frame(const Box& box, const Vector3d& p) {
  return box.pose.orientation.conjugate() * (p - box.pose.position);
}

double local_point_box_distance(const Vector3d& p, const Vector3d& h) {
  const Vector3d outside = (p.cwiseAbs() - h).cwiseMax(0.0);
  return outside.norm();
}

// Slab test: does segment [a, b] (box frame) intersect the box?
bool local_segment_hits_box(const Vector3d& a, const Vector3d& b, const Vector3d& h) {
  double t0 = 0.0, t1 = 1.0;
  const Vector3d d = b - a;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (a[i] < -h[i] || a[i] > h[i]) return false;
      continue;
    }
    double ta = (-h[i] - a[i]) / d[i];
    double tb = (h[i] - a[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

double segment_box_distance(const Vector3d& a, const Vector3d& b, const Box& box) {
  const Vector3d la = to_box_frame(box, a), lb = to_box_frame(box, b);
  const Vector3d& h = box.half_extents;
  if (local_segment_hits_box(la, lb, h)) return 0.0;
  // Distance to a convex set is convex along the segment: golden-section search.
  auto f = [&](double t) { return local_point_box_distance(la + t * (lb - la), h); };
  constexpr double invphi = 0.6180339887498949;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > 1e-13) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f(0.0), f(1.0), f1, f2});
}

// Separating axis test for two oriented boxes.
bool boxes_overlap(const Box& A, const Box& B) {
  const Eigen::Matrix3d Ra = A.pose.orientation.toRotationMatrix();
  const Eigen::Matrix3d Rb = B.pose.orientation.toRotationMatrix();
  const Vector3d t = B.pose.position - A.pose.position;
  std::vector<Vector3d> axes;
  axes.reserve(15);
  for (int i = 0; i < 3; ++i) axes.push_back(Ra.col(i));
  for (int i = 0; i < 3; ++i) axes.push_back(Rb.col(i));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vector3d c = Ra.col(i).cross(Rb.col(j));
      if (c.squaredNorm() > 1e-18) axes.push_back(c.normalized());
    }
  }
  for (const auto& ax : axes) {
    double ra = 0.0, rb = 0.0;
    for (int i = 0; i < 3; ++i) {
      ra += A.half_extents[i] * std::abs(Ra.col(i).dot(ax));
      rb += B.half_extents[i] * std::abs(Rb.col(i).dot(ax));
    }
    if (std::abs(t.dot(ax)) > ra + rb + kContactTolerance) return false;
  }
  return true;
}

double bounding_radius(const Shape& s, Vector3d& center) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          center = v.center;
          return v.radius;
        } else if constexpr (std::is_same_v<T, Capsule>) {
          center = 0.5 * (v.a + v.b);
          return 0.5 * (v.b - v.a).norm() + v.radius;
        } else {
          center = v.pose.position;
          return v.half_extents.norm();
        }
      },
      s);
}

struct DistanceVisitor {
  double operator()(const Sphere& a, const Sphere& b) const {
    return (a.center - b.center).norm() - a.radius - b.radius;
  }
  double operator()(const Sphere& a, const Capsule& b) const {
    return point_segment_distance(a.center, b.a, b.b) - a.radius - b.radius;
  }
  double operator()(const Capsule& a, const Sphere& b) const { return (*this)(b, a); }
  double operator()(const Capsule& a, const Capsule& b) const {
    return segment_segment_distance(a.a, a.b, b.a, b.b) - a.radius - b.radius;
  }
  double operator()(const Sphere& a, const Box& b) const {
    return local_point_box_distance(to_box_frame(b, a.center), b.half_extents) - a.radius;
  }
  double operator()(const Box& a, const Sphere& b) const { return (*this)(b, a); }
  double operator()(const Capsule& a, const Box& b) const {
    return segment_box_distance(a.a, a.b, b) - a.radius;
  }
  double operator()(const Box& a, const Capsule& b) const { return (*this)(b, a); }
  double operator()(const Box& a, const Box& b) const {
    // Only overlap is decided exactly; report 0 or +inf.
    return boxes_overlap(a, b) ? 0.0 : std::numeric_limits<double>::infinity();
  }
};

}  // namespace

void validate_shape(const Shape& shape) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Box>) {
          if (!(v.half_extents.minCoeff() > 0.0)) throw std::invalid_argument("box half extents must be positive");
        } else {
          if (!(v.radius > 0.0)) throw std::invalid_argument("shape radius must be positive");
        }
      },
      shape);
}

double shape_distance(const Shape& a, const Shape& b) {
  return std::max(0.0, std::visit(DistanceVisitor{}, a, b));
}

bool shape_pair_collides(const Shape& a, const Shape& b) {
  Vector3d ca, cb;
  const double ra = bounding_radius(a, ca);
  const double rb = bounding_radius(b, cb);
  if ((ca - cb).norm() > ra + rb + 1e-6) return false;
  return std::visit(DistanceVisitor{}, a, b) <= kContactTolerance;
}

Environment::Environment(std::vector<Shape> static_shapes, std::uint64_t revision)
    : static_shapes_(std::move(static_shapes)), revision_(revision) {
  for (const auto& s : static_shapes_) validate_shape(s);
}

Environment Environment::add_object(const std::string& id, const Shape& shape) const {
  if (dynamic_.count(id)) throw std::invalid_argument("object id already present: " + id);
  validate_shape(shape);
  Environment next = *this;
  next.dynamic_.emplace(id, shape);
  ++next.revision_;
  return next;
}

Environment Environment::remove_object(const std::string& id) const {
  if (!dynamic_.count(id)) throw std::invalid_argument("unknown object id: " + id);
  Environment next = *this;
  next.dynamic_.erase(id);
  ++next.revision_;
  return next;
}

std::vector<Shape> Environment::all_shapes() const {
  std::vector<Shape> out = static_shapes_;
  for (const auto& [id, s] : dynamic_) out.push_back(s);
  return out;
}

Environment add_object(const Environment& env, const std::string& id, const Shape& shape) {
  return env.add_object(id, shape);
}

Environment remove_object(const Environment& env, const std::string& id) {
  return env.remove_object(id);
}

std::vector<PosedCapsule> posed_capsules(const ArmModel& model, const JointConfig& config) {
  const auto frames = link_frames(model, config);
  std::vector<PosedCapsule> out;
  out.reserve(model.capsules.size());
  for (const auto& c : model.capsules) {
    const auto& T = frames[c.frame];
    out.push_back({c.frame, Capsule{T * c.p0, T * c.p1, c.radius}});
  }
  return out;
}

bool in_collision(const ArmModel& model, const JointConfig& config, const Environment& env) {
  const auto caps = posed_capsules(model, config);
  for (const auto& pc : caps) {
    const Shape s = pc.capsule;
    for (const auto& shape : env.static_shapes()) {
      if (shape_pair_collides(s, shape)) return true;
    }
    for (const auto& [id, shape] : env.dynamic_objects()) {
      if (shape_pair_collides(s, shape)) return true;
    }
  }
  for (std::size_t i = 0; i < caps.size(); ++i) {
    for (std::size_t j = i + 1; j < caps.size(); ++j) {
      if (std::abs(caps[i].frame - caps[j].frame) <= 1) continue;
      if (shape_pair_collides(caps[i].capsule, caps[j].capsule)) return true;
    }
  }
  return false;
}

}  // namespace glfd
