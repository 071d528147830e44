#include <doctest.h>

#include <cmath>
#include <random>

#include "fastfiber/errors.hpp"
#include "fastfiber/kernels.hpp"
#include "support/adaptive_oracle.hpp"

using namespace fastfiber;

namespace {
std::mt19937_64 rng(20240611ull);
Vec3 random_point(double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}
}  // namespace

TEST_CASE("green: values, symmetry, singularity") {
  Vec3 p(0, 0, 0), q(1, 0, 0);
  CHECK(green(p, q) == doctest::Approx(1.0 / (4.0 * M_PI)).epsilon(1e-15));
  CHECK(green(p, Vec3(0, 2, 0)) == doctest::Approx(1.0 / (8.0 * M_PI)).epsilon(1e-15));
  for (int i = 0; i < 100; ++i) {
    Vec3 a = random_point(), b = random_point();
    if ((a - b).norm() < 1e-9) continue;
    CHECK(green(a, b) == green(b, a));
  }
  CHECK_THROWS_AS(green(p, p), SingularityError);
  CHECK_THROWS_AS(grad_green(p, p), SingularityError);
}

TEST_CASE("grad_green: direct formula and finite differences") {
  Vec3 g = grad_green(Vec3(0, 0, 0), Vec3(1, 0, 0));
  CHECK(g.x() == doctest::Approx(1.0 / (4.0 * M_PI)).epsilon(1e-14));
  CHECK(g.y() == 0.0);
  CHECK(g.z() == 0.0);

  double max_rel = 0.0;
  for (int i = 0; i < 100; ++i) {
    Vec3 p = random_point(), q = random_point();
    double d = (p - q).norm();
    if (d < 1e-3) continue;
    double h = 1e-6 * d;
    Vec3 g_an = grad_green(p, q);
    for (int c = 0; c < 3; ++c) {
      Vec3 e = Vec3::Zero();
      e[c] = h;
      double fd = (green(p + e, q) - green(p - e, q)) / (2.0 * h);
      max_rel = std::max(max_rel, std::abs(fd - g_an[c]) / g_an.norm());
    }
  }
  CHECK(max_rel <= 1e-6);

  // orthogonal direction sees no flux
  Vec3 p(0.3, -0.2, 0.5), q(1.3, -0.2, 0.5);
  Vec3 n(0, 1, 0);
  CHECK(n.dot(grad_green(p, q)) == 0.0);
}

TEST_CASE("line potential and field against the adaptive oracle") {
  Vec3 a(0, 0, 0), b(0.7, 0.3, -0.2);
  for (const Vec3& target : {Vec3(0.5, 1.0, 0.0), Vec3(0.2, 0.05, 0.01), Vec3(-2.0, 1.0, 3.0)}) {
    double oracle = testing::adaptive_seg(
        a, b, [&](const Vec3& y) { return green(target, y); }, 1e-12);
    CHECK(line_potential_uniform(a, b, target) == doctest::Approx(oracle).epsilon(1e-9));

    Vec3 field = line_field_uniform(a, b, target);
    for (int c = 0; c < 3; ++c) {
      double oc = testing::adaptive_seg(
          a, b, [&](const Vec3& y) { return grad_green(target, y)[c]; }, 1e-12);
      CHECK(field[c] == doctest::Approx(oc).epsilon(1e-8));
    }
    // and it is the gradient of the potential
    double h = 1e-6;
    for (int c = 0; c < 3; ++c) {
      Vec3 e = Vec3::Zero();
      e[c] = h;
      double fd = (line_potential_uniform(a, b, target + e) -
                   line_potential_uniform(a, b, target - e)) /
                  (2.0 * h);
      CHECK(field[c] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  // regularized kernel reduces the on-axis value
  Vec3 on_axis(0.35, 0.15, -0.1);
  CHECK_THROWS_AS(line_potential_uniform(a, b, on_axis), SingularityError);
  double reg = line_potential_uniform(a, b, on_axis, 1e-3);
  CHECK(reg > 0.0);
  CHECK(std::isfinite(reg));
}

TEST_CASE("triangle single layer matches the adaptive oracle") {
  Triangle t{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.2, 0.9, 0)};
  Vec3 vals(1.0, -0.5, 2.0);
  auto dens = [&](const Vec3& y) {
    double l1 = y.x() - 0.2 / 0.9 * y.y();
    double l2 = y.y() / 0.9;
    return vals[0] * (1.0 - l1 - l2) + vals[1] * l1 + vals[2] * l2;
  };
  for (const Vec3& target :
       {Vec3(10.0, 3.0, 4.0), Vec3(0.4, 0.3, 0.4), Vec3(0.4, 0.3, 0.02), Vec3(1.2, -0.3, 0.05)}) {
    double oracle = testing::adaptive_tri(
        t, [&](const Vec3& y) { return dens(y) * green(target, y); }, 1e-11);
    double got = tri_single_layer(t, vals, target);
    CHECK(got == doctest::Approx(oracle).epsilon(1e-6));
  }
  // on-panel target: the single layer is continuous across the panel, so the
  // value must agree with a just-off-panel evaluation
  Vec3 on(0.4, 0.3, 0.0), off(0.4, 0.3, 1e-7);
  CHECK(tri_single_layer(t, vals, on) ==
        doctest::Approx(tri_single_layer(t, vals, off)).epsilon(1e-5));
}

TEST_CASE("triangle gradient layer matches the adaptive oracle off-panel") {
  Triangle t{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.2, 0.9, 0)};
  Vec3 vals(0.3, 1.1, -0.7);
  Vec3 dir = Vec3(0.2, -0.4, 0.9).normalized();
  auto dens = [&](const Vec3& y) {
    double l1 = y.x() - 0.2 / 0.9 * y.y();
    double l2 = y.y() / 0.9;
    return vals[0] * (1.0 - l1 - l2) + vals[1] * l1 + vals[2] * l2;
  };
  for (const Vec3& target : {Vec3(3.0, 1.0, 2.0), Vec3(0.4, 0.2, 0.15), Vec3(-0.3, 0.4, 0.08)}) {
    double oracle = testing::adaptive_tri(
        t, [&](const Vec3& y) { return dens(y) * dir.dot(grad_green(target, y)); }, 1e-11);
    CHECK(tri_grad_dot_layer(t, vals, target, dir) == doctest::Approx(oracle).epsilon(1e-6));
  }
  // coplanar target with the normal direction: kernel vanishes pointwise
  Vec3 n(0, 0, 1);
  CHECK(tri_grad_dot_layer(t, vals, Vec3(2.0, 2.0, 0.0), n) == 0.0);
}

TEST_CASE("single layer far-field monopole limit") {
  Triangle t{Vec3(0, 0, 0), Vec3(0.01, 0, 0), Vec3(0, 0.01, 0)};
  Vec3 vals(1.0, 1.0, 1.0);
  double diam = t.diameter();
  Vec3 target = Vec3(1, 1, 1).normalized() * (1e6 * diam);
  double got = tri_single_layer(t, vals, target);
  double monopole = t.area() * green(t.centroid(), target);
  CHECK(std::abs(got - monopole) <= 1e-5 * std::abs(monopole));
}

TEST_CASE("single layer value independent of panel subdivision") {
  Triangle t{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.2, 0.9, 0)};
  Vec3 target(0.35, 0.25, 0.03);
  double whole = tri_single_layer(t, Vec3(1, 1, 1), target);
  Vec3 mab = 0.5 * (t.a + t.b), mbc = 0.5 * (t.b + t.c), mca = 0.5 * (t.c + t.a);
  const Triangle sub[4] = {{t.a, mab, mca}, {mab, t.b, mbc}, {mca, mbc, t.c}, {mab, mbc, mca}};
  double parts = 0.0;
  for (const auto& s : sub) parts += tri_single_layer(s, Vec3(1, 1, 1), target);
  CHECK(whole == doctest::Approx(parts).epsilon(1e-6));
}

TEST_CASE("spec panel op: segment with linear density and zero density") {
  // unit segment on the x-axis, constant density, target (0.5, 1, 0)
  Segment s{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  Vec3 target(0.5, 1.0, 0.0);
  double oracle = testing::adaptive_seg(
      s.a, s.b, [&](const Vec3& y) { return green(target, y); }, 1e-12);
  CHECK(integrate_single_layer_panel(s, 1.0, 1.0, target) ==
        doctest::Approx(oracle).epsilon(1e-9));

  // linear density
  double oracle_lin = testing::adaptive_seg(
      s.a, s.b, [&](const Vec3& y) { return (0.3 + 0.9 * y.x()) * green(target, y); }, 1e-12);
  CHECK(integrate_single_layer_panel(s, 0.3, 1.2, target) ==
        doctest::Approx(oracle_lin).epsilon(1e-9));

  // on-line target outside the segment
  Vec3 axis_target(1.7, 0.0, 0.0);
  double oracle_axis = testing::adaptive_seg(
      s.a, s.b, [&](const Vec3& y) { return green(axis_target, y); }, 1e-12);
  CHECK(integrate_single_layer_panel(s, 1.0, 1.0, axis_target) ==
        doctest::Approx(oracle_axis).epsilon(1e-8));

  CHECK(integrate_single_layer_panel(s, 0.0, 0.0, target) == 0.0);
  Triangle t{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  CHECK(integrate_single_layer_panel(t, Vec3(0, 0, 0), target) == 0.0);
}
