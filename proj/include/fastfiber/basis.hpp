#pragma once

#include <array>
#include <vector>

#include "fastfiber/contrast.hpp"
#include "fastfiber/mesh.hpp"

namespace fastfiber {

// Knobs shared by the dense and compressed assembly paths. Quadrature and
// near-field choices must agree between the two so the compressed near field
// reproduces dense entries exactly.
struct AssemblyOptions {
  int tri_rule_degree = 5;     // 7-point rule
  int seg_rule_points = 4;
  double near_multiplier = 3.0;  // near if dist <= mult * max panel diameter

  // sigma_s of the surface right-hand side; the dipole-compartment choice is
  // the self-consistent one, the alternative reads the subscript literally.
  enum class RhsSigma { dipole_compartment, surface_inner };
  RhsSigma rhs_sigma = RhsSigma::dipole_compartment;

  // scale of the surface-tested wire coupling block
  enum class CouplingSigma { white_matter, surface_inner };
  CouplingSigma coupling_sigma = CouplingSigma::white_matter;
};

// Quadrature cloud with scalar per-basis weights (single-layer sources and
// divergence-reduced wire charges).
struct ScalarCloud {
  std::vector<Vec3> points;
  std::vector<int> offset;      // CSR over points, size points+1
  std::vector<int> basis;
  std::vector<double> weight;
  int n_basis = 0;
};

// Cloud whose couples carry a direction (test functionals of gradient kernels:
// surface normals here).
struct DirectedCloud {
  std::vector<Vec3> points;
  std::vector<int> offset;
  std::vector<int> basis;
  std::vector<Vec3> weight;
  int n_basis = 0;
};

// Flattened surfaces with global vertex/triangle indexing and the per-vertex
// Gram conductivity factor.
struct SurfaceScene {
  std::vector<Vec3> vertices;          // global vertex positions
  std::vector<int> vertex_surface;     // 0-based surface per vertex
  std::vector<double> gram_factor;     // (s_in+s_out)/(2(s_out-s_in)) per vertex

  struct Tri {
    std::array<int, 3> v;              // global vertex ids
    int surface;
    Vec3 normal;                       // unit, outward
    Vec3 centroid;
    double area;
    double diameter;
  };
  std::vector<Tri> tris;
  std::vector<std::vector<int>> vertex_tris;  // adjacency, global ids

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_tris() const { return static_cast<int>(tris.size()); }
  Triangle triangle(int t) const {
    return {vertices[tris[t].v[0]], vertices[tris[t].v[1]], vertices[tris[t].v[2]]};
  }
};

// Wire bookkeeping: bases live on interior (degree-2) nodes; each segment
// knows its incident bases and the constant charge-density coefficients of
// the divergence-reduced functionals.
struct WireScene {
  std::vector<Vec3> nodes;
  struct Seg {
    int a, b;            // node ids
    int basis_a, basis_b;  // -1 when the node carries no basis
    double length;
    double radius;
    double area;         // pi r^2
    Vec3 tangent;
    Vec3 midpoint;
  };
  std::vector<Seg> segs;
  std::vector<int> basis_node;         // basis -> node
  std::vector<std::array<int, 2>> basis_segs;  // basis -> [left seg, right seg]
  std::vector<double> chi_t;           // tangential contrast per segment
  std::vector<double> inv_chi_t;

  int n_basis() const { return static_cast<int>(basis_node.size()); }
  int n_segs() const { return static_cast<int>(segs.size()); }
  Segment segment(int s) const { return {nodes[segs[s].a], nodes[segs[s].b]}; }
  // regularization radius for touching-segment kernels
  double reg_radius(int s1, int s2) const {
    double r1 = segs[s1].radius, r2 = segs[s2].radius;
    return std::sqrt(0.5 * (r1 * r1 + r2 * r2));
  }
};

// Everything the assemblers need, built once per model.
struct AssemblyContext {
  const HeadModel* model = nullptr;
  AssemblyOptions opts;
  ContrastField contrast;
  SurfaceScene surf;
  WireScene wire;

  // quadrature clouds (surface clouds share points; wire clouds share points)
  ScalarCloud surf_sources;        // psi * w
  DirectedCloud surf_normal_tests; // psi * w * n, tests of D_ss
  DirectedCloud dsw_tests;         // psi * w * n / sigma, tests of D_sw
  ScalarCloud wire_tau;            // -d(a f)/dl, tests of S_ws and S_ww
  ScalarCloud wire_rho_scaled;     // +d(a f)/dl / sigma_w, trial of S_ww
  ScalarCloud wire_rho_chi;        // +d(a chi_t f)/dl, trial of D_sw

  // node point charges (nonzero only when a*coef jumps across a node):
  // position, basis, magnitude per cloud flavor
  struct PointCharge {
    Vec3 p;
    int basis;
    double q_tau, q_rho_scaled, q_rho_chi;
    int seg_left, seg_right;
  };
  std::vector<PointCharge> node_charges;

  // per-vertex scale folded into the D_sw test functional
  std::vector<double> dsw_test_scale;

  int n_s() const { return surf.n_vertices(); }
  int n_w() const { return wire.n_basis(); }
};

// Builds scene + clouds (validation is the caller's business; generators and
// load_model already validate).
AssemblyContext make_context(const HeadModel& model, const AssemblyOptions& opts = {});

// Variant with an externally supplied contrast (chi -> 0 studies).
AssemblyContext make_context(const HeadModel& model, const ContrastField& contrast,
                             const AssemblyOptions& opts = {});

// Compartment index (1-based; n_surfaces+1 = exterior) containing the point.
int find_compartment(const HeadModel& model, const Vec3& p);

}  // namespace fastfiber
