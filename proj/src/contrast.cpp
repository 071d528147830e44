#include "fastfiber/contrast.hpp"

#include <cmath>

#include "fastfiber/errors.hpp"

namespace fastfiber {

bool ContrastField::any_singular() const { return first_singular_segment() >= 0; }

int ContrastField::first_singular_segment() const {
  for (size_t s = 0; s < singular.size(); ++s)
    if (singular[s]) return static_cast<int>(s);
  return -1;
}

ContrastField build_contrast(const HeadModel& model) {
  const WireMesh& w = model.wires;
  double sigma_w = model.sigma_white();
  ContrastField f;
  f.chi.resize(w.n_segments());
  f.chi_t.resize(w.n_segments());
  f.inv_chi_t.resize(w.n_segments());
  f.singular.resize(w.n_segments());
  for (int s = 0; s < w.n_segments(); ++s) {
    const Mat3& sig = w.tensors[s];
    double det = sig.determinant();
    double scale = sig.cwiseAbs().maxCoeff();
    if (!(std::abs(det) > 1e-30 * scale * scale * scale))
      throw ContrastError("wire tensor on segment " + std::to_string(s) + " is singular");
    Mat3 chi = (sigma_w * Mat3::Identity() - sig) * sig.inverse();
    Vec3 t = w.segment(s).tangent();
    double chi_t = t.dot(chi * t);
    f.chi[s] = chi;
    f.chi_t[s] = chi_t;
    bool singular = !(std::abs(chi_t) > 1e-12);
    f.singular[s] = singular ? 1 : 0;
    f.inv_chi_t[s] = singular ? 0.0 : 1.0 / chi_t;
  }
  if (w.n_segments() > 0) {
    int bad = f.first_singular_segment();
    if (bad >= 0)
      throw ContrastError("tangential contrast vanishes on segment " + std::to_string(bad) +
                          " (wire conductivity equals the background)");
  }
  return f;
}

ContrastField contrast_from_tangential(const WireMesh& wires, const std::vector<double>& chi_t) {
  if (chi_t.size() != wires.segments.size())
    throw DimensionError("contrast_from_tangential: one value per segment required");
  ContrastField f;
  int n = wires.n_segments();
  f.chi.resize(n);
  f.chi_t = chi_t;
  f.inv_chi_t.resize(n);
  f.singular.resize(n);
  for (int s = 0; s < n; ++s) {
    Vec3 t = wires.segment(s).tangent();
    f.chi[s] = chi_t[s] * t * t.transpose();
    bool singular = !(std::abs(chi_t[s]) > 1e-12);
    f.singular[s] = singular ? 1 : 0;
    f.inv_chi_t[s] = singular ? 0.0 : 1.0 / chi_t[s];
  }
  return f;
}

}  // namespace fastfiber
