#include "fastfiber/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "fastfiber/errors.hpp"

namespace fastfiber {

namespace {
constexpr double kFourPi = 4.0 * M_PI;
}

double green(const Vec3& p, const Vec3& q) {
  double r = (p - q).norm();
  if (r == 0.0) throw SingularityError("green evaluated at coincident points");
  return 1.0 / (kFourPi * r);
}

Vec3 grad_green(const Vec3& p, const Vec3& q) {
  Vec3 d = q - p;
  double r2 = d.squaredNorm();
  if (r2 == 0.0) throw SingularityError("grad_green evaluated at coincident points");
  return d / (kFourPi * r2 * std::sqrt(r2));
}

double green_regularized(const Vec3& p, const Vec3& q, double reg_radius) {
  double r = std::sqrt((p - q).squaredNorm() + reg_radius * reg_radius);
  if (r == 0.0) throw SingularityError("green_regularized with zero radius at coincident points");
  return 1.0 / (kFourPi * r);
}

double line_potential_uniform(const Vec3& a, const Vec3& b, const Vec3& p, double reg_radius) {
  Vec3 d = b - a;
  double len = d.norm();
  if (len == 0.0) throw GeometryError("degenerate segment in line_potential_uniform");
  Vec3 u = d / len;
  Vec3 v = p - a;
  double tp = v.dot(u);
  double rho2 = std::max(0.0, v.squaredNorm() - tp * tp) + reg_radius * reg_radius;
  double rho = std::sqrt(rho2);
  if (rho <= 1e-12 * len) {
    // target on the supporting line
    if (tp >= -1e-12 * len && tp <= len * (1.0 + 1e-12))
      throw SingularityError("line_potential_uniform target on the segment");
    double s1 = std::abs(tp), s2 = std::abs(tp - len);
    return std::log(std::max(s1, s2) / std::min(s1, s2)) / kFourPi;
  }
  return (std::asinh((len - tp) / rho) + std::asinh(tp / rho)) / kFourPi;
}

// gradient (with respect to p) of line_potential_uniform: the integral of
// grad_green(p, y) along the segment
Vec3 line_field_uniform(const Vec3& a, const Vec3& b, const Vec3& p) {
  Vec3 d = b - a;
  double len = d.norm();
  if (len == 0.0) throw GeometryError("degenerate segment in line_field_uniform");
  Vec3 u = d / len;
  Vec3 v = p - a;
  double tp = v.dot(u);
  Vec3 perp = v - tp * u;
  double rho = perp.norm();
  double ra = v.norm();
  double rb = (p - b).norm();
  if (ra == 0.0 || rb == 0.0) throw SingularityError("line_field_uniform target on an endpoint");
  Vec3 e = (1.0 / rb - 1.0 / ra) / kFourPi * u;
  if (rho > 0.0) {
    if (tp >= 0.0 && tp <= len && rho < 1e-14 * len)
      throw SingularityError("line_field_uniform target on the segment");
    double ft = ((len - tp) / rb + tp / ra) / (kFourPi * rho);
    e += ft * (perp / rho);
  } else if (tp >= 0.0 && tp <= len) {
    throw SingularityError("line_field_uniform target on the segment");
  }
  // e was accumulated for the (p - y) kernel; the gradient kernel flips it
  return -e;
}

namespace {

// Closest point on a triangle (region walk on clamped projections).
Vec3 closest_point_on_triangle(const Vec3& p, const Triangle& t) {
  Vec3 n = t.scaled_normal();
  double a2 = n.squaredNorm();
  if (a2 > 0.0) {
    n /= std::sqrt(a2);
    Vec3 q = p - (p - t.a).dot(n) * n;
    Vec3 e0 = t.b - t.a, e1 = t.c - t.b, e2 = t.a - t.c;
    if ((e0.cross(q - t.a)).dot(n) >= 0.0 && (e1.cross(q - t.b)).dot(n) >= 0.0 &&
        (e2.cross(q - t.c)).dot(n) >= 0.0)
      return q;
  }
  auto closest_on_edge = [&](const Vec3& u, const Vec3& v) {
    Vec3 d = v - u;
    double s = d.squaredNorm() > 0 ? std::clamp((p - u).dot(d) / d.squaredNorm(), 0.0, 1.0) : 0.0;
    return Vec3(u + s * d);
  };
  Vec3 c0 = closest_on_edge(t.a, t.b);
  Vec3 c1 = closest_on_edge(t.b, t.c);
  Vec3 c2 = closest_on_edge(t.c, t.a);
  double d0 = (p - c0).squaredNorm(), d1 = (p - c1).squaredNorm(), d2 = (p - c2).squaredNorm();
  if (d0 <= d1 && d0 <= d2) return c0;
  return d1 <= d2 ? c1 : c2;
}

// Linear density evaluated from the values at the three vertices.
inline double density_at(const Triangle& t, const Vec3& vals, const Vec3& y) {
  // barycentric via areas against the plane normal
  Vec3 n = t.scaled_normal();
  double a2 = 2.0 * n.squaredNorm();
  double l0 = ((t.b - y).cross(t.c - y)).dot(n) / a2;
  double l1 = ((t.c - y).cross(t.a - y)).dot(n) / a2;
  double l2 = 1.0 - l0 - l1;
  return vals[0] * l0 + vals[1] * l1 + vals[2] * l2;
}

// Duffy integration over the wedge (apex, A, B): the collapsed-square map
// removes the 1/r singularity at the apex. kernel(y, w) accumulates into
// whatever it captures.
template <typename Kernel>
void duffy_wedge(const Vec3& apex, const Vec3& va, const Vec3& vb, Kernel&& kernel) {
  double two_area = ((va - apex).cross(vb - apex)).norm();
  if (two_area == 0.0) return;
  const SegmentRule& gl = segment_rule_points(8);
  for (const auto& gu : gl.points) {
    double u = gu.t;
    for (const auto& gv : gl.points) {
      double v = gv.t;
      Vec3 y = apex + u * ((1.0 - v) * (va - apex) + v * (vb - apex));
      kernel(y, gu.w * gv.w * u * two_area);
    }
  }
}

// Near-field panel quadrature: adaptive 4-way subdivision (children far from
// the target get a plain high-order rule) with a Duffy split on the
// singularity-carrying leaf.
template <typename Kernel>
void near_tri_recurse(const Triangle& t, const Vec3& p, int depth, Kernel&& kernel) {
  double diam = t.diameter();
  double dist = point_triangle_distance(p, t);
  if (dist > 1.5 * diam) {
    const TriangleRule& rule = triangle_rule(8);
    double two_area = 2.0 * t.area();
    for (const auto& q : rule.points) kernel(t.at_bary(q.u, q.v), q.w * two_area);
    return;
  }
  // Duffy handles an on-panel apex exactly and a moderately separated target
  // well; in between, zoom toward the target until one of the two holds.
  bool on_panel = dist <= 1e-9 * diam;
  bool resolved = diam <= 2.0 * dist;
  if (on_panel || resolved || depth >= 10) {
    Vec3 cp = closest_point_on_triangle(p, t);
    const Vec3* vs[3] = {&t.a, &t.b, &t.c};
    for (int e = 0; e < 3; ++e) duffy_wedge(cp, *vs[e], *vs[(e + 1) % 3], kernel);
    return;
  }
  Vec3 mab = 0.5 * (t.a + t.b), mbc = 0.5 * (t.b + t.c), mca = 0.5 * (t.c + t.a);
  const Triangle sub[4] = {{t.a, mab, mca}, {mab, t.b, mbc}, {mca, mbc, t.c}, {mab, mbc, mca}};
  for (const auto& s : sub) near_tri_recurse(s, p, depth + 1, kernel);
}

template <typename Kernel>
void near_panel_sweep(const Triangle& t, const Vec3& p, Kernel&& kernel) {
  near_tri_recurse(t, p, 0, kernel);
}

template <typename Kernel>
double near_panel_integral(const Triangle& t, const Vec3& p, Kernel&& pointwise) {
  double total = 0.0;
  near_panel_sweep(t, p, [&](const Vec3& y, double w) { total += w * pointwise(y); });
  return total;
}

}  // namespace

double tri_single_layer(const Triangle& t, const Vec3& vertex_values, const Vec3& p,
                        int far_rule_degree) {
  double diam = t.diameter();
  double dist = point_triangle_distance(p, t);
  if (dist > 3.0 * diam) {
    const TriangleRule& rule = triangle_rule(far_rule_degree);
    double two_area = 2.0 * t.area();
    double sum = 0.0;
    for (const auto& q : rule.points) {
      Vec3 y = t.at_bary(q.u, q.v);
      double dens = vertex_values[0] * (1.0 - q.u - q.v) + vertex_values[1] * q.u +
                    vertex_values[2] * q.v;
      sum += q.w * two_area * dens * green(p, y);
    }
    return sum;
  }
  return near_panel_integral(t, p, [&](const Vec3& y) {
    return density_at(t, vertex_values, y) / (kFourPi * (p - y).norm());
  });
}

Vec3 tri_grad_single_layer(const Triangle& t, const Vec3& vertex_values, const Vec3& p,
                           int far_rule_degree) {
  double diam = t.diameter();
  double dist = point_triangle_distance(p, t);
  if (dist > 3.0 * diam) {
    const TriangleRule& rule = triangle_rule(far_rule_degree);
    double two_area = 2.0 * t.area();
    Vec3 sum = Vec3::Zero();
    for (const auto& q : rule.points) {
      Vec3 y = t.at_bary(q.u, q.v);
      double dens = vertex_values[0] * (1.0 - q.u - q.v) + vertex_values[1] * q.u +
                    vertex_values[2] * q.v;
      sum += q.w * two_area * dens * grad_green(p, y);
    }
    return sum;
  }
  Vec3 out;
  for (int c = 0; c < 3; ++c) {
    out[c] = near_panel_integral(t, p, [&](const Vec3& y) {
      Vec3 d = y - p;
      double r = d.norm();
      return density_at(t, vertex_values, y) * d[c] / (kFourPi * r * r * r);
    });
  }
  return out;
}

double tri_grad_dot_layer(const Triangle& t, const Vec3& vertex_values, const Vec3& p,
                          const Vec3& dir, int far_rule_degree) {
  double diam = t.diameter();
  double dist = point_triangle_distance(p, t);
  if (dist > 3.0 * diam) {
    const TriangleRule& rule = triangle_rule(far_rule_degree);
    double two_area = 2.0 * t.area();
    double sum = 0.0;
    for (const auto& q : rule.points) {
      Vec3 y = t.at_bary(q.u, q.v);
      double dens = vertex_values[0] * (1.0 - q.u - q.v) + vertex_values[1] * q.u +
                    vertex_values[2] * q.v;
      sum += q.w * two_area * dens * dir.dot(grad_green(p, y));
    }
    return sum;
  }
  return near_panel_integral(t, p, [&](const Vec3& y) {
    Vec3 d = y - p;
    double num = dir.dot(d);
    if (num == 0.0) return 0.0;
    double r = d.norm();
    return density_at(t, vertex_values, y) * num / (kFourPi * r * r * r);
  });
}

namespace {

// Barycentric coordinates of y in t (assumes y in the plane of t).
inline Vec3 barycentric(const Triangle& t, const Vec3& y) {
  Vec3 n = t.scaled_normal();
  double a2 = 2.0 * n.squaredNorm();
  double l0 = ((t.b - y).cross(t.c - y)).dot(n) / a2;
  double l1 = ((t.c - y).cross(t.a - y)).dot(n) / a2;
  return Vec3(l0, l1, 1.0 - l0 - l1);
}

template <typename Kernel>
Vec3 hats_integral(const Triangle& t, const Vec3& p, int far_rule_degree, bool far,
                   Kernel&& kernel) {
  Vec3 out = Vec3::Zero();
  if (far) {
    const TriangleRule& rule = triangle_rule(far_rule_degree);
    double two_area = 2.0 * t.area();
    for (const auto& q : rule.points) {
      Vec3 y = t.at_bary(q.u, q.v);
      double k = q.w * two_area * kernel(y);
      out[0] += k * (1.0 - q.u - q.v);
      out[1] += k * q.u;
      out[2] += k * q.v;
    }
    return out;
  }
  near_panel_sweep(t, p, [&](const Vec3& y, double w) {
    double k = w * kernel(y);
    if (k == 0.0) return;
    out += k * barycentric(t, y);
  });
  return out;
}

}  // namespace

Vec3 tri_single_layer_hats(const Triangle& t, const Vec3& p, int far_rule_degree) {
  bool far = point_triangle_distance(p, t) > 3.0 * t.diameter();
  return hats_integral(t, p, far_rule_degree, far,
                       [&](const Vec3& y) { return 1.0 / (kFourPi * (p - y).norm()); });
}

Vec3 tri_grad_dot_hats(const Triangle& t, const Vec3& p, const Vec3& dir, int far_rule_degree) {
  bool far = point_triangle_distance(p, t) > 3.0 * t.diameter();
  return hats_integral(t, p, far_rule_degree, far, [&](const Vec3& y) {
    Vec3 d = y - p;
    double num = dir.dot(d);
    if (num == 0.0) return 0.0;
    double r = d.norm();
    return num / (kFourPi * r * r * r);
  });
}

double integrate_single_layer_panel(const Triangle& t, const Vec3& vertex_values,
                                    const Vec3& target) {
  if (t.area() == 0.0) throw GeometryError("degenerate triangle panel");
  return tri_single_layer(t, vertex_values, target);
}

double integrate_single_layer_panel(const Segment& s, double value_a, double value_b,
                                    const Vec3& target) {
  double len = s.length();
  if (len == 0.0) throw GeometryError("degenerate segment panel");
  // split density into constant + linear-in-arclength parts and use the
  // closed-form primitives of 1/R and s/R
  Vec3 u = s.tangent();
  Vec3 v = target - s.a;
  double tp = v.dot(u);
  double rho2 = std::max(0.0, v.squaredNorm() - tp * tp);
  double rho = std::sqrt(rho2);
  double s1 = -tp, s2 = len - tp;
  double slope = (value_b - value_a) / len;
  if (rho == 0.0) {
    if (tp >= 0.0 && tp <= len)
      throw SingularityError("single-layer target on the segment panel");
    // on the supporting line outside the segment: |s| keeps one sign
    double sign = s1 > 0.0 ? 1.0 : -1.0;
    double i0 = sign * std::log(s2 / s1);
    double i1 = sign * (s2 - s1);
    return ((value_a + slope * tp) * i0 + slope * i1) / kFourPi;
  }
  double r1 = std::sqrt(s1 * s1 + rho2), r2 = std::sqrt(s2 * s2 + rho2);
  double i0 = std::asinh(s2 / rho) - std::asinh(s1 / rho);
  double i1 = r2 - r1;
  return ((value_a + slope * tp) * i0 + slope * i1) / kFourPi;
}

}  // namespace fastfiber
