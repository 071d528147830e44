#include <doctest.h>

#include <cmath>

#include "fastfiber/errors.hpp"
#include "fastfiber/mesh.hpp"

using namespace fastfiber;

TEST_CASE("icosahedron at level 0") {
  auto spheres = generate_nested_spheres({1.0}, 0);
  REQUIRE(spheres.size() == 1);
  const auto& s = spheres[0];
  CHECK(s.n_vertices() == 12);
  CHECK(s.n_triangles() == 20);
  CHECK(s.euler_characteristic() == 2);
  for (const auto& v : s.vertices) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-14));
  // outward orientation at every centroid
  for (int t = 0; t < s.n_triangles(); ++t) {
    Triangle tri = s.triangle(t);
    CHECK(tri.unit_normal().dot(tri.centroid().normalized()) > 0.0);
  }
}

TEST_CASE("nested spheres: counts and nesting") {
  auto spheres = generate_nested_spheres({0.08, 0.085, 0.09, 0.092}, 3);
  REQUIRE(spheres.size() == 4);
  for (const auto& s : spheres) {
    CHECK(s.n_vertices() == 642);  // 10*4^3 + 2
    CHECK(s.n_triangles() == 1280);
    CHECK(s.euler_characteristic() == 2);
  }
  // vertices of sphere i inside sphere i+1 (ray casting)
  for (int i = 0; i + 1 < 4; ++i) {
    bool all_inside = true;
    for (int v = 0; v < spheres[i].n_vertices(); v += 37)
      all_inside = all_inside && point_inside_surface(spheres[i].vertices[v], spheres[i + 1]);
    CHECK(all_inside);
    CHECK_FALSE(point_inside_surface(spheres[i + 1].vertices[0], spheres[i]));
  }
}

TEST_CASE("sphere generation rejects bad input") {
  CHECK_THROWS_AS(generate_nested_spheres({0.09, 0.08}, 1), GeometryError);
  CHECK_THROWS_AS(generate_nested_spheres({0.08, 0.08}, 1), GeometryError);
  CHECK_THROWS_AS(generate_nested_spheres({}, 1), GeometryError);
  CHECK_THROWS_AS(generate_nested_spheres({1.0}, -1), GeometryError);
}

TEST_CASE("orthogonal fibers: volume rule and containment") {
  double bounding = 0.08, volume = 4.5e-7;
  WireMesh wires = generate_orthogonal_fibers(bounding, 0.03, 6, volume);
  CHECK(wires.n_segments() > 0);
  CHECK(wires.total_volume() == doctest::Approx(volume).epsilon(1e-12));
  // uniform radius satisfies r = sqrt(V / (pi L))
  double expected_r = std::sqrt(volume / (M_PI * wires.total_length()));
  for (double r : wires.radii) CHECK(r == doctest::Approx(expected_r).epsilon(1e-14));
  double max_norm = 0.0;
  for (const auto& n : wires.nodes) max_norm = std::max(max_norm, n.norm());
  CHECK(max_norm < bounding);

  CHECK_THROWS_AS(generate_orthogonal_fibers(0.08, 1.0, 6, volume), GeometryError);
  CHECK_THROWS_AS(generate_orthogonal_fibers(0.08, -0.1, 6, volume), GeometryError);
  CHECK_THROWS_AS(generate_orthogonal_fibers(0.08, 0.03, 6, 0.0), GeometryError);
}

TEST_CASE("one straight fiber: radius from the volume rule") {
  // r = 0.01 when L = 0.1 and V = pi * 1e-4 * 0.1
  WireMesh w;
  w.nodes = {Vec3(0, 0, 0), Vec3(0.05, 0, 0), Vec3(0.1, 0, 0)};
  w.segments = {{0, 1}, {1, 2}};
  double volume = M_PI * 1e-4 * 0.1;
  double r = std::sqrt(volume / (M_PI * 0.1));
  CHECK(r == doctest::Approx(0.01).epsilon(1e-15));
  w.radii = {r, r};
  w.tensors = {Mat3::Identity(), Mat3::Identity()};
  CHECK(w.total_volume() == doctest::Approx(volume).epsilon(1e-14));
}

TEST_CASE("fiber-frame tensors are SPD with the tangential value on the axis") {
  WireMesh wires = generate_orthogonal_fibers(0.08, 0.04, 4, 4.5e-7);
  build_fiber_tensors(wires, 1.3, 0.13);
  for (int s = 0; s < wires.n_segments(); ++s) {
    Vec3 t = wires.segment(s).tangent();
    CHECK(t.dot(wires.tensors[s] * t) == doctest::Approx(1.3).epsilon(1e-12));
    Vec3 any(0.3, -0.5, 0.81);
    Vec3 perp = (any - any.dot(t) * t).normalized();
    CHECK(perp.dot(wires.tensors[s] * perp) == doctest::Approx(0.13).epsilon(1e-12));
  }
}

TEST_CASE("validate_model accepts the canonical model and flags defects") {
  HeadModel model;
  model.surfaces = generate_nested_spheres({0.08, 0.09}, 1);
  model.conductivities = {0.13, 1.79, 0.0};
  model.white_matter_index = 1;
  model.wires = generate_orthogonal_fibers(0.08, 0.05, 4, 1e-7);
  build_fiber_tensors(model.wires, 1.3, 0.13);
  CHECK_NOTHROW(validate_model(model));

  SUBCASE("open surface") {
    model.surfaces[0].triangles.pop_back();
    CHECK_THROWS_WITH_AS(validate_model(model),
                         doctest::Contains("open surface"), GeometryError);
  }
  SUBCASE("inverted orientation") {
    for (auto& t : model.surfaces[0].triangles) std::swap(t[0], t[1]);
    CHECK_THROWS_AS(validate_model(model), GeometryError);
  }
  SUBCASE("equal conductivities across an interface") {
    model.conductivities[1] = 0.13;
    CHECK_THROWS_WITH_AS(validate_model(model), doctest::Contains("equal conductivities"),
                         GeometryError);
  }
  SUBCASE("nonzero exterior") {
    model.conductivities[2] = 0.5;
    CHECK_THROWS_AS(validate_model(model), GeometryError);
  }
  SUBCASE("wire outside the white-matter compartment") {
    model.wires.nodes[0] = Vec3(0.2, 0, 0);
    CHECK_THROWS_AS(validate_model(model), GeometryError);
  }
  SUBCASE("non-SPD tensor") {
    model.wires.tensors[0](0, 0) = -1.0;
    model.wires.tensors[0](1, 1) = -1.0;
    model.wires.tensors[0](2, 2) = -1.0;
    CHECK_THROWS_AS(validate_model(model), GeometryError);
  }
  SUBCASE("nesting violation") {
    std::swap(model.surfaces[0], model.surfaces[1]);
    model.surfaces[0].surface_id = 1;
    model.surfaces[1].surface_id = 2;
    CHECK_THROWS_AS(validate_model(model), GeometryError);
  }
}
