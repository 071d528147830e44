#include "fastfiber/mesh.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "fastfiber/errors.hpp"
#include "fastfiber/threads.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fastfiber {

int SurfaceMesh::euler_characteristic() const {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : triangles)
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  return n_vertices() - static_cast<int>(edges.size()) + n_triangles();
}

double SurfaceMesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < n_triangles(); ++t) a += triangle(t).area();
  return a;
}

Aabb SurfaceMesh::bounding_box() const {
  Aabb box;
  for (const auto& v : vertices) box.grow(v);
  return box;
}

double SurfaceMesh::signed_volume() const {
  double vol = 0.0;
  for (const auto& t : triangles)
    vol += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]])) / 6.0;
  return vol;
}

double WireMesh::cross_section(int s) const { return M_PI * radii[s] * radii[s]; }

double WireMesh::total_length() const {
  double l = 0.0;
  for (int s = 0; s < n_segments(); ++s) l += segment_length(s);
  return l;
}

double WireMesh::total_volume() const {
  double v = 0.0;
  for (int s = 0; s < n_segments(); ++s) v += cross_section(s) * segment_length(s);
  return v;
}

int HeadModel::n_surface_vertices() const {
  int n = 0;
  for (const auto& s : surfaces) n += s.n_vertices();
  return n;
}

namespace {

// Unit icosahedron (12 vertices, 20 faces, outward orientation).
SurfaceMesh unit_icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  SurfaceMesh m;
  m.vertices = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return m;
}

SurfaceMesh subdivide_on_sphere(const SurfaceMesh& in) {
  SurfaceMesh out;
  out.vertices = in.vertices;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec3 v = (out.vertices[a] + out.vertices[b]).normalized();
    out.vertices.push_back(v);
    int idx = static_cast<int>(out.vertices.size()) - 1;
    midpoint.emplace(key, idx);
    return idx;
  };
  for (const auto& t : in.triangles) {
    int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
    out.triangles.push_back({t[0], ab, ca});
    out.triangles.push_back({t[1], bc, ab});
    out.triangles.push_back({t[2], ca, bc});
    out.triangles.push_back({ab, bc, ca});
  }
  return out;
}

}  // namespace

std::vector<SurfaceMesh> generate_nested_spheres(const std::vector<double>& radii,
                                                 int subdivision_level) {
  if (radii.empty()) throw GeometryError("generate_nested_spheres: no radii given");
  for (size_t i = 0; i + 1 < radii.size(); ++i)
    if (radii[i] >= radii[i + 1])
      throw GeometryError("generate_nested_spheres: radii must be strictly increasing");
  if (radii.front() <= 0.0) throw GeometryError("generate_nested_spheres: radii must be positive");
  if (subdivision_level < 0) throw GeometryError("generate_nested_spheres: negative level");

  SurfaceMesh unit = unit_icosahedron();
  for (int l = 0; l < subdivision_level; ++l) unit = subdivide_on_sphere(unit);

  std::vector<SurfaceMesh> out;
  for (size_t i = 0; i < radii.size(); ++i) {
    SurfaceMesh m = unit;
    for (auto& v : m.vertices) v *= radii[i];
    m.surface_id = static_cast<int>(i) + 1;
    out.push_back(std::move(m));
  }
  return out;
}

WireMesh generate_orthogonal_fibers(double bounding_radius, double spacing,
                                    int segments_per_fiber, double total_volume) {
  if (spacing <= 0.0) throw GeometryError("fiber spacing must be positive");
  if (total_volume <= 0.0) throw GeometryError("fiber total volume must be positive");
  if (segments_per_fiber < 2)
    throw GeometryError("fibers need at least 2 segments (one interior node)");

  // Keep the lattice strictly inside the faceted icosphere: clip to a slightly
  // smaller ball and require a minimum chord.
  const double clip = 0.92 * bounding_radius;
  const double min_half_chord = 0.05 * clip;

  WireMesh wires;
  // Offsets stagger the three families so lines from different families keep
  // a distance of spacing/2.
  struct Family {
    int axis;
    double off_u, off_v;  // offsets of the two transverse coordinates
  };
  const Family families[3] = {{0, 0.0, 0.5}, {1, 0.0, 0.5}, {2, 0.0, 0.5}};

  int kmax = static_cast<int>(std::floor(clip / spacing)) + 1;
  for (const auto& fam : families) {
    int ua = (fam.axis + 1) % 3, va = (fam.axis + 2) % 3;
    for (int i = -kmax; i <= kmax; ++i) {
      for (int j = -kmax; j <= kmax; ++j) {
        double cu = (i + fam.off_u) * spacing;
        double cv = (j + fam.off_v) * spacing;
        double d2 = cu * cu + cv * cv;
        if (d2 >= clip * clip) continue;
        double half = std::sqrt(clip * clip - d2);
        if (half < min_half_chord) continue;
        int base = wires.n_nodes();
        for (int k = 0; k <= segments_per_fiber; ++k) {
          Vec3 p = Vec3::Zero();
          p[ua] = cu;
          p[va] = cv;
          p[fam.axis] = -half + (2.0 * half) * k / segments_per_fiber;
          wires.nodes.push_back(p);
        }
        for (int k = 0; k < segments_per_fiber; ++k)
          wires.segments.push_back({base + k, base + k + 1});
      }
    }
  }

  if (wires.segments.empty())
    throw GeometryError("fiber spacing too large: empty wire model");

  double total_length = 0.0;
  for (int s = 0; s < wires.n_segments(); ++s) total_length += wires.segment_length(s);
  double radius = std::sqrt(total_volume / (M_PI * total_length));
  wires.radii.assign(wires.segments.size(), radius);
  wires.tensors.assign(wires.segments.size(), Mat3::Identity());
  return wires;
}

void build_fiber_tensors(WireMesh& wires, double tangential, double background) {
  if (tangential <= 0.0 || background <= 0.0)
    throw GeometryError("conductivities must be positive in build_fiber_tensors");
  wires.tensors.resize(wires.segments.size());
  for (int s = 0; s < wires.n_segments(); ++s) {
    Vec3 t = wires.segment(s).tangent();
    wires.tensors[s] = background * Mat3::Identity() + (tangential - background) * t * t.transpose();
  }
}

bool point_inside_surface(const Vec3& p, const SurfaceMesh& surface) {
  std::mt19937_64 rng(0x5eedf00dULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int attempt = 0; attempt < 32; ++attempt) {
    Vec3 dir(u(rng), u(rng), u(rng));
    double n = dir.norm();
    if (n < 0.1) continue;
    dir /= n;
    int crossings = 0;
    bool bad = false;
    for (int t = 0; t < surface.n_triangles() && !bad; ++t) {
      double th;
      bool degenerate;
      if (ray_triangle_intersect(p, dir, surface.triangle(t), th, degenerate)) ++crossings;
      if (degenerate) bad = true;
    }
    if (!bad) return (crossings % 2) == 1;
  }
  throw GeometryError("point-in-surface test failed to find a clean ray");
}

double distance_to_surface(const Vec3& p, const SurfaceMesh& surface) {
  double d = std::numeric_limits<double>::infinity();
  for (int t = 0; t < surface.n_triangles(); ++t)
    d = std::min(d, point_triangle_distance(p, surface.triangle(t)));
  return d;
}

namespace {

void validate_surface(const SurfaceMesh& s, int index) {
  std::string name = "surface " + std::to_string(index + 1);
  if (s.n_vertices() < 4 || s.n_triangles() < 4)
    throw GeometryError(name + ": too few vertices/triangles for a closed surface");
  for (const auto& t : s.triangles)
    for (int k = 0; k < 3; ++k)
      if (t[k] < 0 || t[k] >= s.n_vertices())
        throw GeometryError(name + ": triangle index out of range");

  // every edge must appear exactly once per direction (closed + consistently
  // oriented)
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : s.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a == b) throw GeometryError(name + ": degenerate triangle edge");
      if (++directed[{a, b}] > 1)
        throw GeometryError(name + ": duplicated directed edge (inconsistent orientation)");
    }
  }
  for (const auto& [edge, count] : directed) {
    auto rev = directed.find({edge.second, edge.first});
    if (rev == directed.end())
      throw GeometryError(name + ": open surface (boundary edge found)");
  }
  if (s.euler_characteristic() != 2)
    throw GeometryError(name + ": Euler characteristic != 2");
  for (int t = 0; t < s.n_triangles(); ++t)
    if (!(s.triangle(t).area() > 0.0))
      throw GeometryError(name + ": zero-area triangle " + std::to_string(t));
  if (s.signed_volume() <= 0.0)
    throw GeometryError(name + ": inward orientation (negative enclosed volume)");
}

}  // namespace

void validate_model(const HeadModel& model) {
  int c = model.n_surfaces();
  if (c == 0) throw GeometryError("model has no surfaces");
  if (static_cast<int>(model.conductivities.size()) != c + 1)
    throw GeometryError("expected " + std::to_string(c + 1) + " compartment conductivities");
  for (double sigma : model.conductivities)
    if (!(sigma >= 0.0)) throw GeometryError("conductivities must be non-negative");
  if (model.conductivities.back() != 0.0)
    throw GeometryError("exterior conductivity must be 0");
  for (int i = 0; i < c; ++i)
    if (model.sigma_in(i) == model.sigma_out(i))
      throw GeometryError("equal conductivities across surface " + std::to_string(i + 1) +
                          " make the interface unknown ill-defined");

  for (int i = 0; i < c; ++i) validate_surface(model.surfaces[i], i);

  // strict nesting: all vertices of surface i inside surface i+1
  for (int i = 0; i + 1 < c; ++i) {
    const auto& inner = model.surfaces[i];
    const auto& outer = model.surfaces[i + 1];
    std::vector<char> ok(inner.n_vertices(), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count())
#endif
    for (int v = 0; v < inner.n_vertices(); ++v)
      ok[v] = point_inside_surface(inner.vertices[v], outer) ? 1 : 0;
    for (int v = 0; v < inner.n_vertices(); ++v)
      if (!ok[v])
        throw GeometryError("surface " + std::to_string(i + 1) + " vertex " + std::to_string(v) +
                            " not inside surface " + std::to_string(i + 2));
  }

  if (model.white_matter_index < 1 || model.white_matter_index > c)
    throw GeometryError("white_matter_index out of range");

  const WireMesh& w = model.wires;
  if (!w.empty()) {
    if (w.radii.size() != w.segments.size() || w.tensors.size() != w.segments.size())
      throw GeometryError("wire radii/tensors size mismatch");
    for (int s = 0; s < w.n_segments(); ++s) {
      if (!(w.segment_length(s) > 0.0))
        throw GeometryError("wire segment " + std::to_string(s) + " has zero length");
      if (!(w.radii[s] > 0.0))
        throw GeometryError("wire segment " + std::to_string(s) + " has non-positive radius");
      Mat3 sym = w.tensors[s];
      if ((sym - sym.transpose()).cwiseAbs().maxCoeff() > 1e-12 * sym.cwiseAbs().maxCoeff())
        throw GeometryError("wire tensor " + std::to_string(s) + " not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat3> es(sym);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw GeometryError("wire tensor " + std::to_string(s) + " not positive definite");
    }
    const SurfaceMesh& housing = model.surfaces[model.white_matter_index - 1];
    std::vector<char> ok(w.n_nodes(), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count())
#endif
    for (int n = 0; n < w.n_nodes(); ++n) {
      bool inside = point_inside_surface(w.nodes[n], housing);
      if (inside && model.white_matter_index >= 2)
        inside = !point_inside_surface(w.nodes[n], model.surfaces[model.white_matter_index - 2]);
      ok[n] = inside ? 1 : 0;
    }
    for (int n = 0; n < w.n_nodes(); ++n)
      if (!ok[n])
        throw GeometryError("wire node " + std::to_string(n) +
                            " outside the white-matter compartment");
  }
}

}  // namespace fastfiber
