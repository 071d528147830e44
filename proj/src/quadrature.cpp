#include "fastfiber/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "fastfiber/errors.hpp"

namespace fastfiber {

namespace {

// Appends the 3 permutations of barycentric (a, a, 1-2a).
void push3(TriangleRule& r, double a, double w) {
  double c = 1.0 - 2.0 * a;
  r.points.push_back({a, a, w});
  r.points.push_back({c, a, w});
  r.points.push_back({a, c, w});
}

SegmentRule make_segment_rule(int n);

// Conical-product rule: Gauss x Gauss on the collapsed square, weights
// positive, exact to machine precision for total degree <= d with
// n = ceil((d+2)/2) points per axis.
TriangleRule conical_rule(int degree) {
  TriangleRule r;
  r.degree = degree;
  int n = (degree + 3) / 2;
  const SegmentRule gl = make_segment_rule(n);
  for (const auto& qs : gl.points)
    for (const auto& qt : gl.points)
      r.points.push_back({qs.t, qt.t * (1.0 - qs.t), qs.w * qt.w * (1.0 - qs.t)});
  return r;
}

// Closed-form rules (exact coefficients), plus conical-product fallbacks.
// Weights stored pre-scaled so they sum to the reference area 1/2.
TriangleRule make_triangle_rule(int degree) {
  TriangleRule r;
  r.degree = degree;
  switch (degree) {
    case 1:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0});
      break;
    case 2:
      push3(r, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 5: {
      // Radon's 7-point rule
      double s15 = std::sqrt(15.0);
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0});
      push3(r, (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
      push3(r, (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
      break;
    }
    case 6:
    case 8:
      return conical_rule(degree);
    default:
      throw DimensionError("no triangle rule of degree " + std::to_string(degree));
  }
  for (auto& p : r.points) p.w *= 0.5;
  return r;
}

SegmentRule make_segment_rule(int n) {
  if (n < 1 || n > 24) throw DimensionError("segment rule size out of range");
  SegmentRule r;
  r.degree = 2 * n - 1;
  r.points.resize(n);
  // Legendre nodes on [-1,1] by Newton from the Chebyshev initial guess.
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0 = 0, p1 = 0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    p0 = 1.0;
    p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1,1] -> [0,1]
    r.points[n - 1 - i] = {0.5 * (x + 1.0), 0.5 * w};
  }
  return r;
}

}  // namespace

const TriangleRule& triangle_rule(int degree) {
  static std::map<int, TriangleRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  int chosen = 0;
  for (int d : {1, 2, 5, 6, 8}) {
    if (d >= degree) {
      chosen = d;
      break;
    }
  }
  if (chosen == 0) throw DimensionError("no triangle rule of degree " + std::to_string(degree));
  auto it = cache.find(chosen);
  if (it == cache.end()) it = cache.emplace(chosen, make_triangle_rule(chosen)).first;
  return it->second;
}

const SegmentRule& segment_rule_points(int n) {
  static std::map<int, SegmentRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_segment_rule(n)).first;
  return it->second;
}

}  // namespace fastfiber
