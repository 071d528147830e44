#pragma once

#include <vector>

#include "fastfiber/mesh.hpp"

namespace fastfiber {

// Per-segment conductivity contrast chi = (sigma_w I - sigma_tensor) *
// sigma_tensor^{-1}. The thin-wire reduction only ever contracts chi along the
// segment tangent, so the scalar chi_t = t.chi.t and its reciprocal are what
// the assembly consumes; the full tensor is kept for inspection. chi is
// rank-deficient transversally whenever the transverse conductivity equals the
// background, so a full tensor inverse does not exist in the typical
// fiber-frame case.
struct ContrastField {
  std::vector<Mat3> chi;
  std::vector<double> chi_t;
  std::vector<double> inv_chi_t;       // 0 where singular
  std::vector<char> singular;          // per segment

  int n_segments() const { return static_cast<int>(chi.size()); }
  bool any_singular() const;
  int first_singular_segment() const;  // -1 if none
};

// Throws ContrastError when a tensor is not invertible or when every tangential
// contrast vanishes (isotropic wires carry no equivalent current).
ContrastField build_contrast(const HeadModel& model);

// Assembles the field from prescribed tangential contrasts (test seam and the
// chi -> 0 limits).
ContrastField contrast_from_tangential(const WireMesh& wires,
                                       const std::vector<double>& chi_t);

}  // namespace fastfiber
