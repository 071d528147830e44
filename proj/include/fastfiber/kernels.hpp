#pragma once

#include "fastfiber/geometry.hpp"
#include "fastfiber/quadrature.hpp"

namespace fastfiber {

// G(p,q) = 1/(4 pi |p - q|). Throws SingularityError for coincident points.
double green(const Vec3& p, const Vec3& q);

// Gradient with respect to the first argument: (q - p)/(4 pi |q - p|^3).
Vec3 grad_green(const Vec3& p, const Vec3& q);

// Regularized kernel for touching wire segments: 1/(4 pi sqrt(d^2 + r^2)).
double green_regularized(const Vec3& p, const Vec3& q, double reg_radius);

// Exact integrals of G and grad G over a straight segment against a constant
// unit density. reg_radius > 0 selects the ring-regularized kernel (potential
// only; the field form is used off-axis where no regularization is needed).
double line_potential_uniform(const Vec3& a, const Vec3& b, const Vec3& p,
                              double reg_radius = 0.0);
Vec3 line_field_uniform(const Vec3& a, const Vec3& b, const Vec3& p);

// Single layer over a triangle with a linear density given by vertex values:
// integral of G(p,y) * density(y) dS(y). Far targets use a Gauss rule; near
// and on-panel targets a graded Duffy scheme split at the projection of p.
double tri_single_layer(const Triangle& t, const Vec3& vertex_values, const Vec3& p,
                        int far_rule_degree = 8);

// Same layout for the gradient kernel: integral of grad_p G(p,y) * density(y).
Vec3 tri_grad_single_layer(const Triangle& t, const Vec3& vertex_values, const Vec3& p,
                           int far_rule_degree = 8);

// Directional form used by the adjoint-double-layer assembly: the dot product
// with dir is taken inside the integrand, so in-plane targets (where the
// kernel vanishes pointwise) integrate to an exact zero instead of a
// divergent vector dotted with the normal.
double tri_grad_dot_layer(const Triangle& t, const Vec3& vertex_values, const Vec3& p,
                          const Vec3& dir, int far_rule_degree = 8);

// Integrals of all three vertex hats at once (one kernel sweep); used by the
// Galerkin assemblers.
Vec3 tri_single_layer_hats(const Triangle& t, const Vec3& p, int far_rule_degree = 8);
Vec3 tri_grad_dot_hats(const Triangle& t, const Vec3& p, const Vec3& dir,
                       int far_rule_degree = 8);

// Spec-facing wrapper: single-layer potential of one panel (triangle or
// segment) with a linear density, singularity-aware.
double integrate_single_layer_panel(const Triangle& t, const Vec3& vertex_values,
                                    const Vec3& target);
double integrate_single_layer_panel(const Segment& s, double value_a, double value_b,
                                    const Vec3& target);

}  // namespace fastfiber
