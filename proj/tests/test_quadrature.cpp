#include <doctest.h>

#include <cmath>

#include "fastfiber/quadrature.hpp"

using namespace fastfiber;

namespace {

// exact integral of u^m v^n over the reference triangle
double tri_monomial(int m, int n) {
  auto fact = [](int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  };
  return fact(m) * fact(n) / fact(m + n + 2);
}

}  // namespace

TEST_CASE("triangle rules are positive, normalized and exact to declared degree") {
  for (int degree : {1, 2, 5, 6, 8}) {
    const TriangleRule& rule = triangle_rule(degree);
    CHECK(rule.degree == degree);
    double sum = 0.0;
    for (const auto& q : rule.points) {
      CHECK(q.w > 0.0);
      CHECK(q.u >= 0.0);
      CHECK(q.v >= 0.0);
      CHECK(q.u + q.v <= 1.0 + 1e-14);
      sum += q.w;
    }
    CHECK(std::abs(sum - 0.5) <= 1e-14);
    for (int m = 0; m <= degree; ++m) {
      for (int n = 0; n + m <= degree; ++n) {
        double val = 0.0;
        for (const auto& q : rule.points) val += q.w * std::pow(q.u, m) * std::pow(q.v, n);
        double exact = tri_monomial(m, n);
        CHECK(std::abs(val - exact) <= 1e-13 * std::abs(exact));
      }
    }
  }
}

TEST_CASE("triangle_rule returns the smallest rule covering the degree") {
  CHECK(triangle_rule(3).degree == 5);
  CHECK(triangle_rule(7).degree == 8);
  CHECK(triangle_rule(1).size() == 1);
  CHECK(triangle_rule(5).size() == 7);
}

TEST_CASE("segment rules are positive, normalized and exact to 2n-1") {
  for (int n : {1, 2, 3, 4, 6, 8, 12, 16}) {
    const SegmentRule& rule = segment_rule_points(n);
    CHECK(rule.size() == n);
    double sum = 0.0;
    for (const auto& q : rule.points) {
      CHECK(q.w > 0.0);
      CHECK(q.t >= 0.0);
      CHECK(q.t <= 1.0);
      sum += q.w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    for (int m = 0; m <= rule.degree; ++m) {
      double val = 0.0;
      for (const auto& q : rule.points) val += q.w * std::pow(q.t, m);
      double exact = 1.0 / (m + 1);
      CHECK(std::abs(val - exact) <= 1e-13 * exact);
    }
  }
}
