#pragma once

// Independent integration oracle for the test suites: plain adaptive
// refinement with embedded error control, no Duffy transforms, no analytic
// primitives. Deliberately kept apart from the library's integration paths.

#include <cmath>
#include <functional>

#include "fastfiber/geometry.hpp"
#include "fastfiber/quadrature.hpp"

namespace fastfiber::testing {

inline double adaptive_tri(const Triangle& t, const std::function<double(const Vec3&)>& f,
                           double tol, int depth = 0) {
  const TriangleRule& coarse = triangle_rule(5);
  const TriangleRule& fine = triangle_rule(8);
  double two_area = 2.0 * t.area();
  double c = 0.0, fi = 0.0;
  for (const auto& q : coarse.points) c += q.w * two_area * f(t.at_bary(q.u, q.v));
  for (const auto& q : fine.points) fi += q.w * two_area * f(t.at_bary(q.u, q.v));
  if (depth >= 14 || std::abs(fi - c) <= tol * (1.0 + std::abs(fi))) return fi;
  Vec3 mab = 0.5 * (t.a + t.b), mbc = 0.5 * (t.b + t.c), mca = 0.5 * (t.c + t.a);
  const Triangle sub[4] = {{t.a, mab, mca}, {mab, t.b, mbc}, {mca, mbc, t.c}, {mab, mbc, mca}};
  double sum = 0.0;
  for (const auto& s : sub) sum += adaptive_tri(s, f, tol * 0.5, depth + 1);
  return sum;
}

inline double adaptive_seg(const Vec3& a, const Vec3& b,
                           const std::function<double(const Vec3&)>& f, double tol,
                           int depth = 0) {
  const SegmentRule& coarse = segment_rule_points(7);
  const SegmentRule& fine = segment_rule_points(15);
  double len = (b - a).norm();
  double c = 0.0, fi = 0.0;
  for (const auto& q : coarse.points) c += q.w * len * f(a + q.t * (b - a));
  for (const auto& q : fine.points) fi += q.w * len * f(a + q.t * (b - a));
  if (depth >= 24 || std::abs(fi - c) <= tol * (1.0 + std::abs(fi))) return fi;
  Vec3 m = 0.5 * (a + b);
  return adaptive_seg(a, m, f, tol * 0.5, depth + 1) + adaptive_seg(m, b, f, tol * 0.5, depth + 1);
}

// double integral over two segments with adaptive outer and inner
inline double adaptive_seg_seg(const Vec3& a1, const Vec3& b1, const Vec3& a2, const Vec3& b2,
                               const std::function<double(const Vec3&, const Vec3&)>& f,
                               double tol) {
  return adaptive_seg(a1, b1,
                      [&](const Vec3& x) {
                        return adaptive_seg(a2, b2, [&](const Vec3& y) { return f(x, y); },
                                            tol * 0.1);
                      },
                      tol);
}

}  // namespace fastfiber::testing
