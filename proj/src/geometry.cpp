#include "fastfiber/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace fastfiber {

double Triangle::diameter() const {
  return std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 d = b - a;
  double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2) {
  // closest points of two segments (Ericson, Real-Time Collision Detection)
  Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double kEps = 1e-30;
  if (a <= kEps && e <= kEps) return r.norm();
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      double b = d1.dot(d2);
      double denom = a * e - b * b;
      if (denom > kEps * a * e) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
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

double point_triangle_distance(const Vec3& p, const Triangle& t) {
  Vec3 n = t.scaled_normal();
  double a2 = n.squaredNorm();
  if (a2 == 0.0) return std::min({(p - t.a).norm(), (p - t.b).norm(), (p - t.c).norm()});
  n /= std::sqrt(a2);

  // Project into the plane and test the inside via edge normals.
  double h = (p - t.a).dot(n);
  Vec3 q = p - h * n;
  Vec3 e0 = t.b - t.a, e1 = t.c - t.b, e2 = t.a - t.c;
  bool inside = (e0.cross(q - t.a)).dot(n) >= 0.0 &&
                (e1.cross(q - t.b)).dot(n) >= 0.0 &&
                (e2.cross(q - t.c)).dot(n) >= 0.0;
  if (inside) return std::abs(h);
  double d0 = point_segment_distance(p, t.a, t.b);
  double d1 = point_segment_distance(p, t.b, t.c);
  double d2 = point_segment_distance(p, t.c, t.a);
  return std::min({d0, d1, d2});
}

bool ray_triangle_intersect(const Vec3& origin, const Vec3& dir, const Triangle& t,
                            double& t_hit, bool& degenerate) {
  constexpr double kEps = 1e-12;
  degenerate = false;
  Vec3 e1 = t.b - t.a;
  Vec3 e2 = t.c - t.a;
  Vec3 pv = dir.cross(e2);
  double det = e1.dot(pv);
  double scale = std::max(e1.norm() * e2.norm(), 1e-300);
  if (std::abs(det) < kEps * scale) {
    degenerate = true;  // ray parallel to plane: caller should retry
    return false;
  }
  double inv = 1.0 / det;
  Vec3 tv = origin - t.a;
  double u = tv.dot(pv) * inv;
  Vec3 qv = tv.cross(e1);
  double v = dir.dot(qv) * inv;
  double w = 1.0 - u - v;
  double t_par = e2.dot(qv) * inv;

  // Hits through an edge or vertex are ambiguous for parity counting.
  constexpr double kBaryEps = 1e-10;
  if (u < -kBaryEps || v < -kBaryEps || w < -kBaryEps) return false;
  if (t_par <= kEps) {
    if (std::abs(t_par) < kEps) degenerate = true;
    return false;
  }
  if (u < kBaryEps || v < kBaryEps || w < kBaryEps) {
    degenerate = true;
    return false;
  }
  t_hit = t_par;
  return true;
}

}  // namespace fastfiber
