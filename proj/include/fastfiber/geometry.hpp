#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace fastfiber {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Triangle {
  Vec3 a, b, c;

  Vec3 centroid() const { return (a + b + c) / 3.0; }
  Vec3 scaled_normal() const { return 0.5 * (b - a).cross(c - a); }  // area-weighted
  double area() const { return scaled_normal().norm(); }
  Vec3 unit_normal() const { return scaled_normal().normalized(); }
  double diameter() const;
  Vec3 at_bary(double u, double v) const { return a * (1.0 - u - v) + b * u + c * v; }
};

struct Segment {
  Vec3 a, b;

  double length() const { return (b - a).norm(); }
  Vec3 tangent() const { return (b - a).normalized(); }
  Vec3 at(double t) const { return a + t * (b - a); }
  Vec3 midpoint() const { return 0.5 * (a + b); }
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& o) {
    lo = lo.cwiseMin(o.lo);
    hi = hi.cwiseMax(o.hi);
  }
  Vec3 extent() const { return hi - lo; }
  bool valid() const { return (lo.array() <= hi.array()).all(); }
};

double point_triangle_distance(const Vec3& p, const Triangle& t);
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);
double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2);

// Moller-Trumbore; returns true on a hit with t > eps along the ray.
bool ray_triangle_intersect(const Vec3& origin, const Vec3& dir, const Triangle& t,
                            double& t_hit, bool& degenerate);

}  // namespace fastfiber
