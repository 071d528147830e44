#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fastfiber/geometry.hpp"

namespace fastfiber {

// Closed, outward-oriented triangulated interface. surface_id is the 1-based
// layer index, innermost = 1.
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  int surface_id = 0;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }
  Triangle triangle(int t) const {
    const auto& tri = triangles[t];
    return {vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]};
  }
  int euler_characteristic() const;
  double total_area() const;
  Aabb bounding_box() const;
  // Signed volume via the divergence theorem; positive for outward orientation.
  double signed_volume() const;
};

// Polyline fiber bundle. Segments carry a radius and a symmetric conductivity
// tensor (6 unique entries). Fibers are maximal runs of consecutive segments;
// basis functions live on interior nodes (see basis.hpp).
struct WireMesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 2>> segments;
  std::vector<double> radii;               // per segment, meters
  std::vector<Mat3> tensors;               // per segment, S/m

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_segments() const { return static_cast<int>(segments.size()); }
  Segment segment(int s) const { return {nodes[segments[s][0]], nodes[segments[s][1]]}; }
  double segment_length(int s) const { return segment(s).length(); }
  double cross_section(int s) const;       // pi r^2
  double total_length() const;
  double total_volume() const;             // sum pi r^2 L
  bool empty() const { return segments.empty(); }
};

struct HeadModel {
  std::vector<SurfaceMesh> surfaces;       // ordered innermost -> outermost
  std::vector<double> conductivities;      // sigma_1 .. sigma_{C+1}, exterior last (= 0)
  WireMesh wires;
  int white_matter_index = 1;              // 1-based compartment housing the wires

  int n_surfaces() const { return static_cast<int>(surfaces.size()); }
  double sigma_in(int surface) const { return conductivities[surface]; }
  double sigma_out(int surface) const { return conductivities[surface + 1]; }
  double sigma_white() const { return conductivities[white_matter_index - 1]; }
  int n_surface_vertices() const;
};

// Icosphere family: one sphere per radius, all centered at the origin.
// Vertex count per sphere is 10*4^level + 2.
std::vector<SurfaceMesh> generate_nested_spheres(const std::vector<double>& radii,
                                                 int subdivision_level);

// Axis-aligned fiber lattice clipped to the sphere of radius bounding_radius
// (shrunk slightly so nodes stay inside the faceted icosphere). The uniform
// segment radius is solved from the requested total volume. Tensors are
// initialized to the identity; see build_fiber_tensors for the physical fill.
WireMesh generate_orthogonal_fibers(double bounding_radius, double spacing,
                                    int segments_per_fiber, double total_volume);

// Fiber-frame tensor: tangential conductivity along each segment, background
// transversally.
void build_fiber_tensors(WireMesh& wires, double tangential, double background);

// Full structural validation: closedness, orientation, nesting, conductivity
// jumps, wire placement, tensor SPD. Throws GeometryError with a specific
// message on the first violation.
void validate_model(const HeadModel& model);

// True if p is strictly inside the closed surface (ray-casting parity with
// retries on degenerate hits).
bool point_inside_surface(const Vec3& p, const SurfaceMesh& surface);

// Distance from p to the triangle soup.
double distance_to_surface(const Vec3& p, const SurfaceMesh& surface);

}  // namespace fastfiber
