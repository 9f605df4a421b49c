#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

namespace eqa {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Rgb = std::array<uint8_t, 3>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Box2 {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Zero();

  Vec2 center() const { return 0.5 * (lo + hi); }
  Vec2 size() const { return hi - lo; }
  double area() const { return size().x() * size().y(); }
  bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }
  bool contains_strictly(const Box2& b) const {
    return b.lo.x() > lo.x() && b.lo.y() > lo.y() && b.hi.x() < hi.x() && b.hi.y() < hi.y();
  }
  // Interiors intersect (touching edges do not count).
  bool overlaps_interior(const Box2& b) const {
    return lo.x() < b.hi.x() && b.lo.x() < hi.x() && lo.y() < b.hi.y() && b.lo.y() < hi.y();
  }
};

// Euclidean distance between two closed axis-aligned boxes (0 when they touch).
inline double box_distance(const Box2& a, const Box2& b) {
  const double dx = std::max({0.0, a.lo.x() - b.hi.x(), b.lo.x() - a.hi.x()});
  const double dy = std::max({0.0, a.lo.y() - b.hi.y(), b.lo.y() - a.hi.y()});
  return std::hypot(dx, dy);
}

inline double point_box_distance(const Vec2& p, const Box2& b) {
  return box_distance(Box2{p, p}, b);
}

struct Box3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 center() const { return 0.5 * (lo + hi); }
  Box2 footprint() const { return Box2{lo.head<2>(), hi.head<2>()}; }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

// Axis-aligned rectangle in 3D. `axis` is the normal direction; the two
// in-plane axes are the remaining ones in increasing order.
struct Rect3 {
  int axis = 2;
  double offset = 0.0;
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Zero();
  uint32_t owner = 0;  // object id, 0 for structure
  Rgb rgb{0, 0, 0};

  static constexpr std::array<int, 2> in_plane(int axis) {
    return axis == 0 ? std::array<int, 2>{1, 2}
                     : (axis == 1 ? std::array<int, 2>{0, 2} : std::array<int, 2>{0, 1});
  }

  double area() const { return (hi.x() - lo.x()) * (hi.y() - lo.y()); }

  Vec3 point(double u, double v) const {
    Vec3 p;
    const auto ax = in_plane(axis);
    p[axis] = offset;
    p[ax[0]] = u;
    p[ax[1]] = v;
    return p;
  }

  std::array<Vec3, 4> corners() const {
    return {point(lo.x(), lo.y()), point(hi.x(), lo.y()), point(hi.x(), hi.y()),
            point(lo.x(), hi.y())};
  }

  // Distance from a point to the (closed) rectangle.
  double distance(const Vec3& p) const {
    const auto ax = in_plane(axis);
    const double du = std::max({0.0, lo.x() - p[ax[0]], p[ax[0]] - hi.x()});
    const double dv = std::max({0.0, lo.y() - p[ax[1]], p[ax[1]] - hi.y()});
    const double dn = p[axis] - offset;
    return std::sqrt(du * du + dv * dv + dn * dn);
  }

  // Ray parameter t > 0 of the hit with the closed rectangle, if any. With a
  // unit direction t is the Euclidean hit distance.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const {
    const double d = dir[axis];
    if (d == 0.0) return std::nullopt;
    const double t = (offset - origin[axis]) / d;
    if (!(t > 0.0)) return std::nullopt;
    const auto ax = in_plane(axis);
    const double u = origin[ax[0]] + t * dir[ax[0]];
    const double v = origin[ax[1]] + t * dir[ax[1]];
    if (u < lo.x() || u > hi.x() || v < lo.y() || v > hi.y()) return std::nullopt;
    return t;
  }
};

inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * 3.14159265358979323846;
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  if (a >= two_pi) a -= two_pi;
  return a;
}

// Signed difference target - current folded into (-pi, pi].
inline double angle_diff(double target, double current) {
  constexpr double pi = 3.14159265358979323846;
  double d = std::fmod(target - current, 2.0 * pi);
  if (d <= -pi) d += 2.0 * pi;
  if (d > pi) d -= 2.0 * pi;
  return d;
}

}  // namespace eqa
