#include "fastfiber/dense.hpp"

#include <Eigen/LU>
#include <cmath>
#include <vector>

#include "fastfiber/errors.hpp"
#include "fastfiber/kernels.hpp"
#include "fastfiber/quadrature.hpp"
#include "fastfiber/threads.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fastfiber {

namespace {
constexpr double kFourPi = 4.0 * M_PI;

inline double kernel_g(const Vec3& p, const Vec3& q) {
  return 1.0 / (kFourPi * (p - q).norm());
}

inline double kernel_gdot(const Vec3& p, const Vec3& q, const Vec3& dir) {
  Vec3 d = q - p;
  double r2 = d.squaredNorm();
  return dir.dot(d) / (kFourPi * r2 * std::sqrt(r2));
}

}  // namespace

double dipole_single_layer(const DipoleSource& d, const Vec3& p) {
  Vec3 r = p - d.position;
  double rr = r.norm();
  if (rr == 0.0) throw SingularityError("dipole kernel at the source point");
  return -d.moment.dot(r) / (kFourPi * rr * rr * rr);
}

Vec3 dipole_grad_single_layer(const DipoleSource& d, const Vec3& p) {
  Vec3 r = p - d.position;
  double rr = r.norm();
  if (rr == 0.0) throw SingularityError("dipole kernel at the source point");
  double r3 = rr * rr * rr;
  return (3.0 * d.moment.dot(r) / (rr * rr)) * r / (kFourPi * r3) - d.moment / (kFourPi * r3);
}

namespace {

// ---------------------------------------------------------------------------
// shared inner-integral helpers (the compressed near field calls the same
// couple-level code, so dense and fast agree to rounding)
// ---------------------------------------------------------------------------

struct TrialTriRef {
  const AssemblyContext& ctx;
  int ts;
};

// true if x is within the refined-quadrature distance of trial triangle ts
inline bool tri_is_near(const AssemblyContext& ctx, const Vec3& x, int ts, double* dist = nullptr) {
  const auto& tri = ctx.surf.tris[ts];
  double lim = ctx.opts.near_multiplier * tri.diameter;
  double d2 = (x - tri.centroid).squaredNorm();
  double crude = lim + tri.diameter;
  if (d2 > crude * crude) return false;
  double d = point_triangle_distance(x, ctx.surf.triangle(ts));
  if (dist) *dist = d;
  return d <= lim;
}

// inner integral of G * (the three vertex hats) over trial triangle ts at x;
// far via the trial cloud (matches the grid path), near via the panel rules
inline void s_inner_tri(const AssemblyContext& ctx, const Vec3& x, int ts, double scale,
                        double* acc, const int* cols) {
  const auto& cloud = ctx.surf_sources;
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.surf.n_tris();
  if (tri_is_near(ctx, x, ts)) {
    Vec3 hats = tri_single_layer_hats(ctx.surf.triangle(ts), x);
    for (int k = 0; k < 3; ++k) acc[cols[k]] += scale * hats[k];
    return;
  }
  int p0 = ts * rule_n;
  for (int q = p0; q < p0 + rule_n; ++q) {
    double g = kernel_g(x, cloud.points[q]);
    int off = cloud.offset[q];
    for (int k = 0; k < 3; ++k) acc[cols[k]] += scale * g * cloud.weight[off + k];
  }
}

// inner integral of dir.grad G * hats over trial triangle ts at x
inline void d_inner_tri(const AssemblyContext& ctx, const Vec3& x, const Vec3& dir, int ts,
                        double scale, double* acc, const int* cols) {
  const auto& cloud = ctx.surf_sources;
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.surf.n_tris();
  if (tri_is_near(ctx, x, ts)) {
    Vec3 hats = tri_grad_dot_hats(ctx.surf.triangle(ts), x, dir);
    for (int k = 0; k < 3; ++k) acc[cols[k]] += scale * hats[k];
    return;
  }
  int p0 = ts * rule_n;
  for (int q = p0; q < p0 + rule_n; ++q) {
    double g = kernel_gdot(x, cloud.points[q], dir);
    int off = cloud.offset[q];
    for (int k = 0; k < 3; ++k) acc[cols[k]] += scale * g * cloud.weight[off + k];
  }
}

enum class WireFlavor { rho_scaled, rho_chi };

// constant charge-density coefficient of basis `which` (0 = start node,
// 1 = end node) on segment s for the given trial flavor
inline double wire_coef(const AssemblyContext& ctx, int s, int which, WireFlavor f) {
  const auto& sg = ctx.wire.segs[s];
  double base = sg.area * (which == 0 ? -1.0 : 1.0) / sg.length;
  if (f == WireFlavor::rho_scaled) return base / ctx.model->sigma_white();
  return base * ctx.wire.chi_t[s];
}

inline const ScalarCloud& wire_cloud(const AssemblyContext& ctx, WireFlavor f) {
  return f == WireFlavor::rho_scaled ? ctx.wire_rho_scaled : ctx.wire_rho_chi;
}

inline bool segs_touch(const AssemblyContext& ctx, int s1, int s2) {
  const auto& a = ctx.wire.segs[s1];
  const auto& b = ctx.wire.segs[s2];
  return a.a == b.a || a.a == b.b || a.b == b.a || a.b == b.b;
}

// inner integral of G * (trial charges on segment s) at x; reg > 0 switches
// to the ring-regularized kernel (touching wire pairs)
inline void s_inner_seg(const AssemblyContext& ctx, const Vec3& x, int s, WireFlavor f,
                        double reg, double scale, double* acc) {
  const auto& sg = ctx.wire.segs[s];
  Segment seg = ctx.wire.segment(s);
  double near_lim = ctx.opts.near_multiplier * sg.length;
  double d = point_segment_distance(x, seg.a, seg.b);
  if (reg > 0.0 || d <= near_lim) {
    double pot = line_potential_uniform(seg.a, seg.b, x, reg);
    for (int which = 0; which < 2; ++which) {
      int b = which == 0 ? sg.basis_a : sg.basis_b;
      if (b < 0) continue;
      acc[b] += scale * pot * wire_coef(ctx, s, which, f);
    }
    return;
  }
  const auto& cloud = wire_cloud(ctx, f);
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.wire.n_segs();
  int p0 = s * rule_n;
  for (int q = p0; q < p0 + rule_n; ++q) {
    double g = kernel_g(x, cloud.points[q]);
    for (int c = cloud.offset[q]; c < cloud.offset[q + 1]; ++c)
      acc[cloud.basis[c]] += scale * g * cloud.weight[c];
  }
}

// inner integral of dir.grad G * (trial charges on segment s) at x
inline void d_inner_seg(const AssemblyContext& ctx, const Vec3& x, const Vec3& dir, int s,
                        WireFlavor f, double scale, double* acc) {
  const auto& sg = ctx.wire.segs[s];
  Segment seg = ctx.wire.segment(s);
  double near_lim = ctx.opts.near_multiplier * sg.length;
  double d = point_segment_distance(x, seg.a, seg.b);
  if (d <= near_lim) {
    Vec3 field = line_field_uniform(seg.a, seg.b, x);
    double e = dir.dot(field);
    for (int which = 0; which < 2; ++which) {
      int b = which == 0 ? sg.basis_a : sg.basis_b;
      if (b < 0) continue;
      acc[b] += scale * e * wire_coef(ctx, s, which, f);
    }
    return;
  }
  const auto& cloud = wire_cloud(ctx, f);
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.wire.n_segs();
  int p0 = s * rule_n;
  for (int q = p0; q < p0 + rule_n; ++q) {
    double g = kernel_gdot(x, cloud.points[q], dir);
    for (int c = cloud.offset[q]; c < cloud.offset[q + 1]; ++c)
      acc[cloud.basis[c]] += scale * g * cloud.weight[c];
  }
}

// trial node point charges (nonzero only with radius or contrast jumps)
inline void point_charges_at(const AssemblyContext& ctx, const Vec3& x, WireFlavor f,
                             double scale, double* acc, int skip_basis = -1) {
  for (const auto& pc : ctx.node_charges) {
    double q = f == WireFlavor::rho_scaled ? pc.q_rho_scaled : pc.q_rho_chi;
    if (q == 0.0 || pc.basis == skip_basis) continue;
    double r = (x - pc.p).norm();
    double reg = 0.0;
    if (r < ctx.wire.segs[pc.seg_left].radius)
      reg = ctx.wire.reg_radius(pc.seg_left, pc.seg_right);
    acc[pc.basis] += scale * q / (kFourPi * std::sqrt(r * r + reg * reg));
  }
}

inline void point_charges_grad_at(const AssemblyContext& ctx, const Vec3& x, const Vec3& dir,
                                  WireFlavor f, double scale, double* acc) {
  for (const auto& pc : ctx.node_charges) {
    double q = f == WireFlavor::rho_scaled ? pc.q_rho_scaled : pc.q_rho_chi;
    if (q == 0.0) continue;
    acc[pc.basis] += scale * q * kernel_gdot(x, pc.p, dir);
  }
}

// refined quadrature along a test segment: bisects until pieces resolve the
// target distance, then applies the segment rule per piece
template <typename Fn>
void refined_segment_points(const AssemblyContext& ctx, int s, double dist, Fn&& fn) {
  const auto& sg = ctx.wire.segs[s];
  Segment seg = ctx.wire.segment(s);
  double d = std::max(dist, 1e-6 * sg.length);
  int k = std::clamp(static_cast<int>(std::ceil(std::log2(sg.length / d))), 0, 6);
  int pieces = 1 << k;
  const SegmentRule& rule = segment_rule_points(ctx.opts.seg_rule_points);
  double plen = sg.length / pieces;
  for (int i = 0; i < pieces; ++i) {
    double t0 = static_cast<double>(i) / pieces;
    for (const auto& q : rule.points) {
      double t = t0 + q.t / pieces;
      fn(seg.at(t), q.w * plen, t);
    }
  }
}

// geometrically graded quadrature resolving the log layer of width eps at a
// segment end (touching-wire integrals); t runs over [0,1]
template <typename Fn>
void graded_segment_points(const AssemblyContext& ctx, int s, bool grade_start, bool grade_end,
                           double eps, Fn&& fn) {
  const auto& sg = ctx.wire.segs[s];
  Segment seg = ctx.wire.segment(s);
  const SegmentRule& rule = segment_rule_points(6);
  eps = std::clamp(eps / sg.length, 1e-9, 0.25);
  std::vector<double> knots = {0.0, 1.0};
  if (grade_start)
    for (double a = eps; a < (grade_end ? 0.5 : 1.0); a *= 2.0) knots.push_back(a);
  if (grade_end)
    for (double a = eps; a < (grade_start ? 0.5 : 1.0); a *= 2.0) knots.push_back(1.0 - a);
  if (grade_start && grade_end) knots.push_back(0.5);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-12; }),
              knots.end());
  for (size_t i = 0; i + 1 < knots.size(); ++i) {
    double lo = knots[i], hi = knots[i + 1];
    if (hi <= lo) continue;
    for (const auto& q : rule.points) {
      double t = lo + (hi - lo) * q.t;
      fn(seg.at(t), q.w * (hi - lo) * sg.length, t);
    }
  }
}

// row of D_ss for test vertex v (no Gram part, no sign)
void dss_row(const AssemblyContext& ctx, int v, double* row) {
  const auto& cloud = ctx.surf_sources;
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.surf.n_tris();
  for (int tt : ctx.surf.vertex_tris[v]) {
    const auto& tri = ctx.surf.tris[tt];
    int k = tri.v[0] == v ? 0 : (tri.v[1] == v ? 1 : 2);
    Vec3 n = tri.normal;
    int p0 = tt * rule_n;
    for (int q = p0; q < p0 + rule_n; ++q) {
      double wi = cloud.weight[cloud.offset[q] + k];
      const Vec3& x = cloud.points[q];
      for (int ts = 0; ts < ctx.surf.n_tris(); ++ts) {
        if (ts == tt) continue;  // flat self panel: kernel vanishes
        d_inner_tri(ctx, x, n, ts, wi, row, ctx.surf.tris[ts].v.data());
      }
    }
  }
}

// row of D_sw for test vertex v
void dsw_row(const AssemblyContext& ctx, int v, double* row) {
  const auto& cloud = ctx.dsw_tests;
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.surf.n_tris();
  for (int tt : ctx.surf.vertex_tris[v]) {
    const auto& tri = ctx.surf.tris[tt];
    int k = tri.v[0] == v ? 0 : (tri.v[1] == v ? 1 : 2);
    int p0 = tt * rule_n;
    for (int q = p0; q < p0 + rule_n; ++q) {
      Vec3 wdir = cloud.weight[cloud.offset[q] + k];
      double wnorm = wdir.norm();
      if (wnorm == 0.0) continue;
      Vec3 dir = wdir / wnorm;
      const Vec3& x = cloud.points[q];
      for (int s = 0; s < ctx.wire.n_segs(); ++s)
        d_inner_seg(ctx, x, dir, s, WireFlavor::rho_chi, wnorm, row);
      point_charges_grad_at(ctx, x, dir, WireFlavor::rho_chi, wnorm, row);
    }
  }
}

// test-charge sweep of wire basis wi: calls fn(point, tau_weight) for the
// refined quadrature against a target at `dist`, or the plain cloud when
// refine = false.
template <typename Fn>
void tau_test_points(const AssemblyContext& ctx, int wi, int si_slot, double dist, bool refine,
                     Fn&& fn) {
  int s = ctx.wire.basis_segs[wi][si_slot];
  const auto& sg = ctx.wire.segs[s];
  int which = (sg.basis_a == wi) ? 0 : 1;
  double dens = -sg.area * (which == 0 ? -1.0 : 1.0) / sg.length;  // tau = -rho
  if (refine) {
    refined_segment_points(ctx, s, dist, [&](const Vec3& p, double w, double) { fn(p, dens * w); });
    return;
  }
  const auto& cloud = ctx.wire_tau;
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.wire.n_segs();
  int p0 = s * rule_n;
  for (int q = p0; q < p0 + rule_n; ++q) {
    for (int c = cloud.offset[q]; c < cloud.offset[q + 1]; ++c)
      if (cloud.basis[c] == wi) fn(cloud.points[q], cloud.weight[c]);
  }
}

// graded sweep for touching trial segments: resolves the log layer near the
// shared node(s)
template <typename Fn>
void tau_test_points_graded(const AssemblyContext& ctx, int wi, int si_slot, int sj, double reg,
                            Fn&& fn) {
  int si = ctx.wire.basis_segs[wi][si_slot];
  const auto& sg = ctx.wire.segs[si];
  const auto& sj_seg = ctx.wire.segs[sj];
  int which = (sg.basis_a == wi) ? 0 : 1;
  double dens = -sg.area * (which == 0 ? -1.0 : 1.0) / sg.length;
  bool grade_start, grade_end;
  if (si == sj) {
    grade_start = grade_end = true;
  } else {
    grade_start = (sg.a == sj_seg.a || sg.a == sj_seg.b);
    grade_end = (sg.b == sj_seg.a || sg.b == sj_seg.b);
  }
  graded_segment_points(ctx, si, grade_start, grade_end, reg,
                        [&](const Vec3& p, double w, double) { fn(p, dens * w); });
}

const AssemblyContext::PointCharge* node_charge_of(const AssemblyContext& ctx, int wi) {
  for (const auto& pc : ctx.node_charges)
    if (pc.basis == wi) return &pc;
  return nullptr;
}

// row of S_ws for wire basis wi
void sws_row(const AssemblyContext& ctx, int wi, double* row) {
  for (int slot = 0; slot < 2; ++slot) {
    int s = ctx.wire.basis_segs[wi][slot];
    Segment seg = ctx.wire.segment(s);
    const auto& sg = ctx.wire.segs[s];
    for (int ts = 0; ts < ctx.surf.n_tris(); ++ts) {
      const auto& tri = ctx.surf.tris[ts];
      double d = std::min({point_triangle_distance(seg.a, ctx.surf.triangle(ts)),
                           point_triangle_distance(seg.midpoint(), ctx.surf.triangle(ts)),
                           point_triangle_distance(seg.b, ctx.surf.triangle(ts))});
      bool near = d <= ctx.opts.near_multiplier * std::max(sg.length, tri.diameter);
      tau_test_points(ctx, wi, slot, d, near, [&](const Vec3& x, double tw) {
        s_inner_tri(ctx, x, ts, tw, row, tri.v.data());
      });
    }
  }
  if (const auto* pc = node_charge_of(ctx, wi); pc && pc->q_tau != 0.0) {
    for (int ts = 0; ts < ctx.surf.n_tris(); ++ts)
      s_inner_tri(ctx, pc->p, ts, pc->q_tau, row, ctx.surf.tris[ts].v.data());
  }
}

// row of S_ww for wire basis wi
void sww_row(const AssemblyContext& ctx, int wi, double* row) {
  for (int slot = 0; slot < 2; ++slot) {
    int si = ctx.wire.basis_segs[wi][slot];
    Segment tseg = ctx.wire.segment(si);
    const auto& tsg = ctx.wire.segs[si];
    for (int sj = 0; sj < ctx.wire.n_segs(); ++sj) {
      const auto& ssg = ctx.wire.segs[sj];
      bool touching = segs_touch(ctx, si, sj);
      double reg = touching ? ctx.wire.reg_radius(si, sj) : 0.0;
      Segment sseg = ctx.wire.segment(sj);
      double d = touching ? 0.0
                          : segment_segment_distance(tseg.a, tseg.b, sseg.a, sseg.b);
      bool near = touching || d <= ctx.opts.near_multiplier * std::max(tsg.length, ssg.length);
      if (touching) {
        tau_test_points_graded(ctx, wi, slot, sj, reg, [&](const Vec3& x, double tw) {
          s_inner_seg(ctx, x, sj, WireFlavor::rho_scaled, reg, tw, row);
        });
      } else if (near) {
        tau_test_points(ctx, wi, slot, d, true, [&](const Vec3& x, double tw) {
          s_inner_seg(ctx, x, sj, WireFlavor::rho_scaled, 0.0, tw, row);
        });
      } else {
        tau_test_points(ctx, wi, slot, d, false, [&](const Vec3& x, double tw) {
          s_inner_seg(ctx, x, sj, WireFlavor::rho_scaled, 0.0, tw, row);
        });
      }
    }
    // trial node point charges against this test segment (exact line integral)
    for (const auto& pc : ctx.node_charges) {
      if (pc.q_rho_scaled == 0.0) continue;
      bool touching = (tsg.a == ctx.wire.basis_node[pc.basis]) ||
                      (tsg.b == ctx.wire.basis_node[pc.basis]);
      double reg = touching ? ctx.wire.reg_radius(si, pc.seg_left) : 0.0;
      int which = (tsg.basis_a == wi) ? 0 : 1;
      double dens = -tsg.area * (which == 0 ? -1.0 : 1.0) / tsg.length;
      row[pc.basis] += dens * pc.q_rho_scaled * line_potential_uniform(tseg.a, tseg.b, pc.p, reg);
    }
  }
  if (const auto* pc_i = node_charge_of(ctx, wi); pc_i && pc_i->q_tau != 0.0) {
    for (int sj = 0; sj < ctx.wire.n_segs(); ++sj) {
      const auto& ssg = ctx.wire.segs[sj];
      bool touching = (ssg.a == ctx.wire.basis_node[wi]) || (ssg.b == ctx.wire.basis_node[wi]);
      double reg = touching ? ctx.wire.reg_radius(pc_i->seg_left, sj) : 0.0;
      s_inner_seg(ctx, pc_i->p, sj, WireFlavor::rho_scaled, reg, pc_i->q_tau, row);
    }
    for (const auto& pc_j : ctx.node_charges) {
      if (pc_j.q_rho_scaled == 0.0) continue;
      double r = (pc_i->p - pc_j.p).norm();
      double reg = r == 0.0 ? ctx.wire.reg_radius(pc_i->seg_left, pc_i->seg_right) : 0.0;
      row[pc_j.basis] +=
          pc_i->q_tau * pc_j.q_rho_scaled / (kFourPi * std::sqrt(r * r + reg * reg));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// block assemblers
// ---------------------------------------------------------------------------

Eigen::SparseMatrix<double> assemble_surface_gram(const AssemblyContext& ctx) {
  int n = ctx.n_s();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(ctx.surf.n_tris() * 9);
  for (const auto& tri : ctx.surf.tris) {
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double gram = tri.area * (a == b ? 1.0 / 6.0 : 1.0 / 12.0);
        trips.emplace_back(tri.v[a], tri.v[b], ctx.surf.gram_factor[tri.v[a]] * gram);
      }
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

Eigen::MatrixXd assemble_double_layer_ss(const AssemblyContext& ctx) {
  int n = ctx.n_s();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(thread_count())
#endif
  for (int v = 0; v < n; ++v) {
    std::vector<double> row(n, 0.0);
    dss_row(ctx, v, row.data());
    for (int j = 0; j < n; ++j) m(v, j) = row[j];
  }
  return m;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble_coupling(const AssemblyContext& ctx) {
  int ns = ctx.n_s(), nw = ctx.n_w();
  Eigen::MatrixXd dsw = Eigen::MatrixXd::Zero(ns, nw);
  Eigen::MatrixXd sws = Eigen::MatrixXd::Zero(nw, ns);
  if (nw == 0) return {dsw, sws};

  // wires must keep a positive distance from every surface
  for (int s = 0; s < ctx.wire.n_segs(); ++s) {
    Segment seg = ctx.wire.segment(s);
    for (const auto& surface : ctx.model->surfaces) {
      double d = std::min(distance_to_surface(seg.a, surface), distance_to_surface(seg.b, surface));
      if (!(d > 0.0))
        throw GeometryError("wire segment " + std::to_string(s) + " touches a surface");
    }
  }

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(thread_count())
#endif
  for (int v = 0; v < ns; ++v) {
    std::vector<double> row(nw, 0.0);
    dsw_row(ctx, v, row.data());
    for (int j = 0; j < nw; ++j) dsw(v, j) = row[j];
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(thread_count())
#endif
  for (int w = 0; w < nw; ++w) {
    std::vector<double> row(ns, 0.0);
    sws_row(ctx, w, row.data());
    for (int j = 0; j < ns; ++j) sws(w, j) = row[j];
  }
  return {dsw, sws};
}

std::pair<Eigen::SparseMatrix<double>, Eigen::MatrixXd> assemble_wire_blocks(
    const AssemblyContext& ctx) {
  int nw = ctx.n_w();
  int bad = ctx.contrast.first_singular_segment();
  if (bad >= 0)
    throw ContrastError("singular contrast on segment " + std::to_string(bad) +
                        ": G_ww is undefined");
  std::vector<Eigen::Triplet<double>> trips;
  for (int s = 0; s < ctx.wire.n_segs(); ++s) {
    const auto& sg = ctx.wire.segs[s];
    double w = sg.area * sg.area * ctx.wire.inv_chi_t[s] * sg.length;
    const int bases[2] = {sg.basis_a, sg.basis_b};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        if (bases[a] < 0 || bases[b] < 0) continue;
        trips.emplace_back(bases[a], bases[b], w * (a == b ? 1.0 / 3.0 : 1.0 / 6.0));
      }
  }
  Eigen::SparseMatrix<double> gww(nw, nw);
  gww.setFromTriplets(trips.begin(), trips.end());

  Eigen::MatrixXd sww = Eigen::MatrixXd::Zero(nw, nw);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(thread_count())
#endif
  for (int w = 0; w < nw; ++w) {
    std::vector<double> row(nw, 0.0);
    sww_row(ctx, w, row.data());
    for (int j = 0; j < nw; ++j) sww(w, j) = row[j];
  }
  return {gww, sww};
}

namespace {

// refined triangle quadrature toward a concentrated source
template <typename Fn>
void refined_tri_points(const Triangle& tri, const Vec3 bary[3], const Vec3& p0,
                        const TriangleRule& rule, int depth, double near_mult, Fn&& fn) {
  double diam = tri.diameter();
  double dist = point_triangle_distance(p0, tri);
  if (depth > 0 && dist <= near_mult * diam) {
    Vec3 mab = 0.5 * (tri.a + tri.b), mbc = 0.5 * (tri.b + tri.c), mca = 0.5 * (tri.c + tri.a);
    Vec3 bab = 0.5 * (bary[0] + bary[1]), bbc = 0.5 * (bary[1] + bary[2]),
         bca = 0.5 * (bary[2] + bary[0]);
    const Triangle sub[4] = {{tri.a, mab, mca}, {mab, tri.b, mbc}, {mca, mbc, tri.c},
                             {mab, mbc, mca}};
    const Vec3 subb[4][3] = {{bary[0], bab, bca}, {bab, bary[1], bbc}, {bca, bbc, bary[2]},
                             {bab, bbc, bca}};
    for (int k = 0; k < 4; ++k)
      refined_tri_points(sub[k], subb[k], p0, rule, depth - 1, near_mult, fn);
    return;
  }
  double two_area = 2.0 * tri.area();
  for (const auto& q : rule.points) {
    Vec3 y = tri.at_bary(q.u, q.v);
    Vec3 b = bary[0] * (1.0 - q.u - q.v) + bary[1] * q.u + bary[2] * q.v;
    fn(y, q.w * two_area, b);
  }
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> assemble_rhs(const AssemblyContext& ctx,
                                                         const DipoleSource& source) {
  const HeadModel& model = *ctx.model;
  int comp = find_compartment(model, source.position);
  if (comp > model.n_surfaces())
    throw GeometryError("dipole source outside the head");
  for (const auto& surface : model.surfaces)
    if (!(distance_to_surface(source.position, surface) > 0.0))
      throw GeometryError("dipole source on an interface");
  for (int s = 0; s < ctx.wire.n_segs(); ++s) {
    Segment seg = ctx.wire.segment(s);
    if (!(point_segment_distance(source.position, seg.a, seg.b) > ctx.wire.segs[s].radius))
      throw GeometryError("dipole source on a wire");
  }
  double sigma_p = model.conductivities[comp - 1];
  if (sigma_p == 0.0) throw GeometryError("dipole in a non-conducting compartment");

  int ns = ctx.n_s(), nw = ctx.n_w();
  Eigen::VectorXd vs = Eigen::VectorXd::Zero(ns);
  Eigen::VectorXd vw = Eigen::VectorXd::Zero(nw);
  const TriangleRule& rule = triangle_rule(ctx.opts.tri_rule_degree);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(thread_count())
#endif
  for (int v = 0; v < ns; ++v) {
    double sigma_s = sigma_p;
    if (ctx.opts.rhs_sigma == AssemblyOptions::RhsSigma::surface_inner)
      sigma_s = model.sigma_in(ctx.surf.vertex_surface[v]);
    if (sigma_s == 0.0) sigma_s = sigma_p;
    double acc = 0.0;
    for (int tt : ctx.surf.vertex_tris[v]) {
      const auto& tri = ctx.surf.tris[tt];
      int k = tri.v[0] == v ? 0 : (tri.v[1] == v ? 1 : 2);
      Vec3 bary[3] = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
      bary[0][0] = bary[1][1] = bary[2][2] = 1.0;
      refined_tri_points(ctx.surf.triangle(tt), bary, source.position, rule, 6,
                         ctx.opts.near_multiplier, [&](const Vec3& y, double w, const Vec3& b) {
                           acc += w * b[k] * tri.normal.dot(dipole_grad_single_layer(source, y));
                         });
    }
    vs[v] = -acc / sigma_s;
  }

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(thread_count())
#endif
  for (int w = 0; w < nw; ++w) {
    double acc = 0.0;
    for (int slot = 0; slot < 2; ++slot) {
      int s = ctx.wire.basis_segs[w][slot];
      const auto& sg = ctx.wire.segs[s];
      Segment seg = ctx.wire.segment(s);
      int which = (sg.basis_a == w) ? 0 : 1;
      double d = point_segment_distance(source.position, seg.a, seg.b);
      refined_segment_points(ctx, s, d, [&](const Vec3& y, double wq, double t) {
        double hat = which == 0 ? 1.0 - t : t;
        acc += wq * sg.area * hat * sg.tangent.dot(dipole_grad_single_layer(source, y));
      });
    }
    vw[w] = -acc / sigma_p;
  }
  return {vs, vw};
}

Eigen::VectorXd deflation_vector(const AssemblyContext& ctx) {
  int ns = ctx.n_s();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(ns);
  int outer = ctx.model->n_surfaces() - 1;
  int count = 0;
  for (int v = 0; v < ns; ++v)
    if (ctx.surf.vertex_surface[v] == outer) ++count;
  for (int v = 0; v < ns; ++v)
    if (ctx.surf.vertex_surface[v] == outer) m[v] = 1.0 / count;
  return m;
}

BlockSystem assemble_dense_system(const AssemblyContext& ctx) {
  BlockSystem sys;
  sys.n_s = ctx.n_s();
  sys.n_w = ctx.n_w();
  sys.G_ss = Eigen::MatrixXd(assemble_surface_gram(ctx));
  sys.D_ss = assemble_double_layer_ss(ctx);
  if (sys.n_w > 0) {
    auto [dsw, sws] = assemble_coupling(ctx);
    sys.D_sw = std::move(dsw);
    sys.S_ws = std::move(sws);
    auto [gww, sww] = assemble_wire_blocks(ctx);
    sys.G_ww = Eigen::MatrixXd(gww);
    sys.S_ww = std::move(sww);
  } else {
    sys.D_sw.resize(sys.n_s, 0);
    sys.S_ws.resize(0, sys.n_s);
    sys.G_ww.resize(0, 0);
    sys.S_ww.resize(0, 0);
  }
  sys.deflation = deflation_vector(ctx);
  // scale from the analytic Gram diagonal of the outermost surface
  double scale = 0.0;
  int outer = ctx.model->n_surfaces() - 1, count = 0;
  for (int v = 0; v < ctx.n_s(); ++v) {
    if (ctx.surf.vertex_surface[v] != outer) continue;
    double diag = 0.0;
    for (int tt : ctx.surf.vertex_tris[v]) diag += ctx.surf.tris[tt].area / 6.0;
    scale += std::abs(ctx.surf.gram_factor[v]) * diag;
    ++count;
  }
  sys.deflation_scale = count > 0 ? scale / count : 0.0;
  return sys;
}

Eigen::MatrixXd BlockSystem::full_matrix(bool deflated) const {
  Eigen::MatrixXd z(n_total(), n_total());
  z.topLeftCorner(n_s, n_s) = -G_ss + D_ss;
  if (n_w > 0) {
    z.topRightCorner(n_s, n_w) = -D_sw;
    z.bottomLeftCorner(n_w, n_s) = -S_ws;
    z.bottomRightCorner(n_w, n_w) = G_ww + S_ww;
  }
  if (deflated && deflation.size() == n_s && deflation_scale != 0.0)
    z.topLeftCorner(n_s, n_s) += deflation_scale * n_s * deflation * deflation.transpose();
  return z;
}

Eigen::VectorXd BlockSystem::apply(const Eigen::VectorXd& alpha, bool deflated) const {
  if (alpha.size() != n_total()) throw DimensionError("BlockSystem::apply dimension mismatch");
  Eigen::VectorXd y(n_total());
  auto as = alpha.head(n_s);
  y.head(n_s) = -(G_ss * as) + D_ss * as;
  if (n_w > 0) {
    auto aw = alpha.tail(n_w);
    y.head(n_s) -= D_sw * aw;
    y.tail(n_w) = -(S_ws * as) + G_ww * aw + S_ww * aw;
  }
  if (deflated && deflation.size() == n_s && deflation_scale != 0.0)
    y.head(n_s) += (deflation_scale * n_s * deflation.dot(as)) * deflation;
  return y;
}

Eigen::VectorXd BlockSystem::rhs() const {
  Eigen::VectorXd v(n_total());
  v.head(n_s) = rhs_s;
  if (n_w > 0) v.tail(n_w) = rhs_w;
  return v;
}

std::size_t BlockSystem::storage_bytes() const {
  auto bytes = [](const Eigen::MatrixXd& m) { return sizeof(double) * m.size(); };
  return bytes(G_ss) + bytes(D_ss) + bytes(D_sw) + bytes(S_ws) + bytes(G_ww) + bytes(S_ww);
}

Eigen::VectorXd dense_solve(const BlockSystem& system, const Eigen::VectorXd& rhs,
                            int dense_ceiling) {
  int n = system.n_total();
  if (n > dense_ceiling)
    throw DimensionError("dense_solve: N=" + std::to_string(n) + " above the ceiling " +
                         std::to_string(dense_ceiling));
  if (rhs.size() != n) throw DimensionError("dense_solve rhs dimension mismatch");
  Eigen::MatrixXd z = system.full_matrix(true);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(z);
  Eigen::VectorXd alpha = lu.solve(rhs);
  double rhs_norm = rhs.norm();
  double resid = (z * alpha - rhs).norm();
  if (!(alpha.allFinite()) || (rhs_norm > 0 && !(resid <= 1e-8 * rhs_norm)))
    throw FactorizationError("dense_solve: system singular after deflation (residual " +
                             std::to_string(resid) + ")");
  return alpha;
}

// ---------------------------------------------------------------------------
// couple-level entries (shared with the compressed near field)
// ---------------------------------------------------------------------------

double dss_entry(const AssemblyContext& ctx, int vi, int vj) {
  const auto& cloud = ctx.surf_sources;
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.surf.n_tris();
  double acc3[3];
  double out = 0.0;
  for (int tt : ctx.surf.vertex_tris[vi]) {
    const auto& tri = ctx.surf.tris[tt];
    int k = tri.v[0] == vi ? 0 : (tri.v[1] == vi ? 1 : 2);
    Vec3 n = tri.normal;
    int p0 = tt * rule_n;
    for (int q = p0; q < p0 + rule_n; ++q) {
      double wi = cloud.weight[cloud.offset[q] + k];
      const Vec3& x = cloud.points[q];
      for (int ts : ctx.surf.vertex_tris[vj]) {
        if (ts == tt) continue;
        const auto& trj = ctx.surf.tris[ts];
        int kj = trj.v[0] == vj ? 0 : (trj.v[1] == vj ? 1 : 2);
        acc3[0] = acc3[1] = acc3[2] = 0.0;
        const int cols[3] = {0, 1, 2};
        d_inner_tri(ctx, x, n, ts, wi, acc3, cols);
        out += acc3[kj];
      }
    }
  }
  return out;
}

double dsw_entry(const AssemblyContext& ctx, int vi, int wj) {
  const auto& cloud = ctx.dsw_tests;
  int rule_n = static_cast<int>(cloud.points.size()) / ctx.surf.n_tris();
  std::vector<double> acc(ctx.n_w(), 0.0);
  for (int tt : ctx.surf.vertex_tris[vi]) {
    const auto& tri = ctx.surf.tris[tt];
    int k = tri.v[0] == vi ? 0 : (tri.v[1] == vi ? 1 : 2);
    int p0 = tt * rule_n;
    for (int q = p0; q < p0 + rule_n; ++q) {
      Vec3 wdir = cloud.weight[cloud.offset[q] + k];
      double wnorm = wdir.norm();
      if (wnorm == 0.0) continue;
      Vec3 dir = wdir / wnorm;
      const Vec3& x = cloud.points[q];
      for (int slot = 0; slot < 2; ++slot)
        d_inner_seg(ctx, x, dir, ctx.wire.basis_segs[wj][slot], WireFlavor::rho_chi, wnorm,
                    acc.data());
      point_charges_grad_at(ctx, x, dir, WireFlavor::rho_chi, wnorm, acc.data());
    }
  }
  return acc[wj];
}

double sws_entry(const AssemblyContext& ctx, int wi, int vj) {
  std::vector<double> acc(ctx.n_s(), 0.0);
  for (int slot = 0; slot < 2; ++slot) {
    int s = ctx.wire.basis_segs[wi][slot];
    Segment seg = ctx.wire.segment(s);
    const auto& sg = ctx.wire.segs[s];
    for (int ts : ctx.surf.vertex_tris[vj]) {
      const auto& tri = ctx.surf.tris[ts];
      double d = std::min({point_triangle_distance(seg.a, ctx.surf.triangle(ts)),
                           point_triangle_distance(seg.midpoint(), ctx.surf.triangle(ts)),
                           point_triangle_distance(seg.b, ctx.surf.triangle(ts))});
      bool near = d <= ctx.opts.near_multiplier * std::max(sg.length, tri.diameter);
      tau_test_points(ctx, wi, slot, d, near, [&](const Vec3& x, double tw) {
        s_inner_tri(ctx, x, ts, tw, acc.data(), tri.v.data());
      });
    }
  }
  if (const auto* pc = node_charge_of(ctx, wi); pc && pc->q_tau != 0.0) {
    for (int ts : ctx.surf.vertex_tris[vj])
      s_inner_tri(ctx, pc->p, ts, pc->q_tau, acc.data(), ctx.surf.tris[ts].v.data());
  }
  return acc[vj];
}

double sww_entry(const AssemblyContext& ctx, int wi, int wj) {
  std::vector<double> acc(ctx.n_w(), 0.0);
  for (int slot = 0; slot < 2; ++slot) {
    int si = ctx.wire.basis_segs[wi][slot];
    Segment tseg = ctx.wire.segment(si);
    const auto& tsg = ctx.wire.segs[si];
    for (int sjslot = 0; sjslot < 2; ++sjslot) {
      int sj = ctx.wire.basis_segs[wj][sjslot];
      const auto& ssg = ctx.wire.segs[sj];
      bool touching = segs_touch(ctx, si, sj);
      double reg = touching ? ctx.wire.reg_radius(si, sj) : 0.0;
      Segment sseg = ctx.wire.segment(sj);
      double d = touching ? 0.0
                          : segment_segment_distance(tseg.a, tseg.b, sseg.a, sseg.b);
      bool near = touching || d <= ctx.opts.near_multiplier * std::max(tsg.length, ssg.length);
      if (touching) {
        tau_test_points_graded(ctx, wi, slot, sj, reg, [&](const Vec3& x, double tw) {
          s_inner_seg(ctx, x, sj, WireFlavor::rho_scaled, reg, tw, acc.data());
        });
      } else if (near) {
        tau_test_points(ctx, wi, slot, d, true, [&](const Vec3& x, double tw) {
          s_inner_seg(ctx, x, sj, WireFlavor::rho_scaled, 0.0, tw, acc.data());
        });
      } else {
        tau_test_points(ctx, wi, slot, d, false, [&](const Vec3& x, double tw) {
          s_inner_seg(ctx, x, sj, WireFlavor::rho_scaled, 0.0, tw, acc.data());
        });
      }
    }
    for (const auto& pc : ctx.node_charges) {
      if (pc.basis != wj || pc.q_rho_scaled == 0.0) continue;
      bool touching = (tsg.a == ctx.wire.basis_node[pc.basis]) ||
                      (tsg.b == ctx.wire.basis_node[pc.basis]);
      double reg = touching ? ctx.wire.reg_radius(si, pc.seg_left) : 0.0;
      int which = (tsg.basis_a == wi) ? 0 : 1;
      double dens = -tsg.area * (which == 0 ? -1.0 : 1.0) / tsg.length;
      acc[pc.basis] += dens * pc.q_rho_scaled * line_potential_uniform(tseg.a, tseg.b, pc.p, reg);
    }
  }
  if (const auto* pc_i = node_charge_of(ctx, wi); pc_i && pc_i->q_tau != 0.0) {
    for (int sjslot = 0; sjslot < 2; ++sjslot) {
      int sj = ctx.wire.basis_segs[wj][sjslot];
      const auto& ssg = ctx.wire.segs[sj];
      bool touching = (ssg.a == ctx.wire.basis_node[wi]) || (ssg.b == ctx.wire.basis_node[wi]);
      double reg = touching ? ctx.wire.reg_radius(pc_i->seg_left, sj) : 0.0;
      s_inner_seg(ctx, pc_i->p, sj, WireFlavor::rho_scaled, reg, pc_i->q_tau, acc.data());
    }
    for (const auto& pc_j : ctx.node_charges) {
      if (pc_j.basis != wj || pc_j.q_rho_scaled == 0.0) continue;
      double r = (pc_i->p - pc_j.p).norm();
      double reg = r == 0.0 ? ctx.wire.reg_radius(pc_i->seg_left, pc_i->seg_right) : 0.0;
      acc[pc_j.basis] +=
          pc_i->q_tau * pc_j.q_rho_scaled / (kFourPi * std::sqrt(r * r + reg * reg));
    }
  }
  return acc[wj];
}

}  // namespace fastfiber
