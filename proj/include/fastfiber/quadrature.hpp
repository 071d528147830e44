#pragma once

#include <vector>

#include "fastfiber/geometry.hpp"

namespace fastfiber {

// Symmetric rule on the reference triangle {u,v >= 0, u+v <= 1}, barycentric
// points, positive weights summing to 1/2.
struct TriangleRule {
  struct Point {
    double u, v, w;  // weight w, sum of weights = 1/2
  };
  std::vector<Point> points;
  int degree = 0;

  int size() const { return static_cast<int>(points.size()); }
};

// Gauss-Legendre on [0,1]; weights sum to 1, exact for degree 2n-1.
struct SegmentRule {
  struct Point {
    double t, w;
  };
  std::vector<Point> points;
  int degree = 0;

  int size() const { return static_cast<int>(points.size()); }
};

// Smallest stock rule exact at least to `degree` (available degrees
// 1,2,4,5,6,8). Returned by reference to a static table.
const TriangleRule& triangle_rule(int degree);

// n-point Gauss-Legendre, nodes computed by Newton iteration (n <= 24).
const SegmentRule& segment_rule_points(int n);

}  // namespace fastfiber
