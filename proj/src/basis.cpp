#include "fastfiber/basis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fastfiber/errors.hpp"
#include "fastfiber/quadrature.hpp"

namespace fastfiber {

namespace {

SurfaceScene build_surface_scene(const HeadModel& model) {
  SurfaceScene s;
  int base = 0;
  for (int si = 0; si < model.n_surfaces(); ++si) {
    const SurfaceMesh& m = model.surfaces[si];
    double s_in = model.sigma_in(si), s_out = model.sigma_out(si);
    if (s_in == s_out)
      throw GeometryError("equal conductivities across surface " + std::to_string(si + 1));
    double factor = (s_in + s_out) / (2.0 * (s_out - s_in));
    for (const auto& v : m.vertices) {
      s.vertices.push_back(v);
      s.vertex_surface.push_back(si);
      s.gram_factor.push_back(factor);
    }
    for (int t = 0; t < m.n_triangles(); ++t) {
      Triangle tri = m.triangle(t);
      SurfaceScene::Tri st;
      st.v = {base + m.triangles[t][0], base + m.triangles[t][1], base + m.triangles[t][2]};
      st.surface = si;
      st.normal = tri.unit_normal();
      st.centroid = tri.centroid();
      st.area = tri.area();
      st.diameter = tri.diameter();
      s.tris.push_back(st);
    }
    base += m.n_vertices();
  }
  s.vertex_tris.resize(s.vertices.size());
  for (int t = 0; t < s.n_tris(); ++t)
    for (int k = 0; k < 3; ++k) s.vertex_tris[s.tris[t].v[k]].push_back(t);
  return s;
}

WireScene build_wire_scene(const HeadModel& model, const ContrastField& contrast) {
  const WireMesh& w = model.wires;
  WireScene ws;
  ws.nodes = w.nodes;
  std::vector<std::vector<std::pair<int, int>>> incident(w.n_nodes());  // (seg, end)
  for (int s = 0; s < w.n_segments(); ++s) {
    incident[w.segments[s][0]].push_back({s, 0});
    incident[w.segments[s][1]].push_back({s, 1});
  }
  std::vector<int> node_basis(w.n_nodes(), -1);
  for (int n = 0; n < w.n_nodes(); ++n) {
    if (incident[n].size() > 2)
      throw GeometryError("wire node " + std::to_string(n) + " has degree > 2 (branching wires unsupported)");
    if (incident[n].size() == 2) {
      node_basis[n] = static_cast<int>(ws.basis_node.size());
      ws.basis_node.push_back(n);
      // order the two segments so [0] ends at the node and [1] starts there
      auto s0 = incident[n][0], s1 = incident[n][1];
      if (s0.second == 0) std::swap(s0, s1);
      ws.basis_segs.push_back({s0.first, s1.first});
    }
  }
  ws.segs.resize(w.n_segments());
  for (int s = 0; s < w.n_segments(); ++s) {
    WireScene::Seg& sg = ws.segs[s];
    sg.a = w.segments[s][0];
    sg.b = w.segments[s][1];
    sg.basis_a = node_basis[sg.a];
    sg.basis_b = node_basis[sg.b];
    Segment seg = w.segment(s);
    sg.length = seg.length();
    sg.radius = w.radii[s];
    sg.area = w.cross_section(s);
    sg.tangent = seg.tangent();
    sg.midpoint = seg.midpoint();
  }
  if (!contrast.chi_t.empty()) {
    ws.chi_t = contrast.chi_t;
    ws.inv_chi_t = contrast.inv_chi_t;
  } else {
    ws.chi_t.assign(w.n_segments(), 0.0);
    ws.inv_chi_t.assign(w.n_segments(), 0.0);
  }
  return ws;
}

void build_surface_clouds(const SurfaceScene& s, const AssemblyOptions& opts,
                          const std::vector<double>& dsw_scale, ScalarCloud& sources,
                          DirectedCloud& normal_tests, DirectedCloud& dsw_tests) {
  const TriangleRule& rule = triangle_rule(opts.tri_rule_degree);
  int npts = s.n_tris() * rule.size();
  sources.points.reserve(npts);
  sources.offset.reserve(npts + 1);
  sources.offset.push_back(0);
  normal_tests.offset.push_back(0);
  dsw_tests.offset.push_back(0);
  sources.n_basis = s.n_vertices();
  normal_tests.n_basis = s.n_vertices();
  dsw_tests.n_basis = s.n_vertices();
  for (int t = 0; t < s.n_tris(); ++t) {
    const auto& tri = s.tris[t];
    Triangle geo = s.triangle(t);
    double two_area = 2.0 * tri.area;
    for (const auto& q : rule.points) {
      Vec3 p = geo.at_bary(q.u, q.v);
      double w = q.w * two_area;
      double shape[3] = {1.0 - q.u - q.v, q.u, q.v};
      sources.points.push_back(p);
      normal_tests.points.push_back(p);
      dsw_tests.points.push_back(p);
      for (int k = 0; k < 3; ++k) {
        sources.basis.push_back(tri.v[k]);
        sources.weight.push_back(w * shape[k]);
        normal_tests.basis.push_back(tri.v[k]);
        normal_tests.weight.push_back(w * shape[k] * tri.normal);
        dsw_tests.basis.push_back(tri.v[k]);
        dsw_tests.weight.push_back(w * shape[k] * dsw_scale[tri.v[k]] * tri.normal);
      }
      sources.offset.push_back(static_cast<int>(sources.basis.size()));
      normal_tests.offset.push_back(static_cast<int>(normal_tests.basis.size()));
      dsw_tests.offset.push_back(static_cast<int>(dsw_tests.basis.size()));
    }
  }
}

// The divergence-reduced charge of a hat on one segment is the constant
// coef/L with sign -1 toward the node where the hat peaks at the segment
// start, +1 when it peaks at the end.
void build_wire_charge_clouds(const WireScene& w, const AssemblyOptions& opts, double sigma_w,
                              ScalarCloud& tau, ScalarCloud& rho_scaled, ScalarCloud& rho_chi,
                              std::vector<AssemblyContext::PointCharge>& node_charges) {
  const SegmentRule& rule = segment_rule_points(opts.seg_rule_points);
  for (ScalarCloud* c : {&tau, &rho_scaled, &rho_chi}) {
    c->offset.push_back(0);
    c->n_basis = w.n_basis();
  }
  for (int s = 0; s < w.n_segs(); ++s) {
    const auto& sg = w.segs[s];
    Segment seg = w.segment(s);
    // d f/dl of the two incident hats
    const int bases[2] = {sg.basis_a, sg.basis_b};
    const double dfdl[2] = {-1.0 / sg.length, 1.0 / sg.length};
    for (const auto& q : rule.points) {
      Vec3 p = seg.at(q.t);
      double wq = q.w * sg.length;
      for (ScalarCloud* c : {&tau, &rho_scaled, &rho_chi}) c->points.push_back(p);
      for (int k = 0; k < 2; ++k) {
        if (bases[k] < 0) continue;
        double rho = sg.area * dfdl[k] * wq;
        tau.basis.push_back(bases[k]);
        tau.weight.push_back(-rho);
        rho_scaled.basis.push_back(bases[k]);
        rho_scaled.weight.push_back(rho / sigma_w);
        rho_chi.basis.push_back(bases[k]);
        rho_chi.weight.push_back(rho * w.chi_t[s]);
      }
      for (ScalarCloud* c : {&tau, &rho_scaled, &rho_chi})
        c->offset.push_back(static_cast<int>(c->basis.size()));
    }
  }
  // Point charges where a (or a*chi_t) jumps across an interior node.
  for (int b = 0; b < w.n_basis(); ++b) {
    int sl = w.basis_segs[b][0], sr = w.basis_segs[b][1];
    double a_l = w.segs[sl].area, a_r = w.segs[sr].area;
    double jump_plain = a_r - a_l;
    double jump_chi = a_r * w.chi_t[sr] - a_l * w.chi_t[sl];
    if (jump_plain == 0.0 && jump_chi == 0.0) continue;
    AssemblyContext::PointCharge pc;
    pc.p = w.nodes[w.basis_node[b]];
    pc.basis = b;
    pc.q_tau = -jump_plain;
    pc.q_rho_scaled = jump_plain / sigma_w;
    pc.q_rho_chi = jump_chi;
    pc.seg_left = sl;
    pc.seg_right = sr;
    node_charges.push_back(pc);
  }
}

}  // namespace

int find_compartment(const HeadModel& model, const Vec3& p) {
  for (int i = 0; i < model.n_surfaces(); ++i)
    if (point_inside_surface(p, model.surfaces[i])) return i + 1;
  return model.n_surfaces() + 1;
}

AssemblyContext make_context(const HeadModel& model, const ContrastField& contrast,
                             const AssemblyOptions& opts) {
  AssemblyContext ctx;
  ctx.model = &model;
  ctx.opts = opts;
  ctx.contrast = contrast;
  ctx.surf = build_surface_scene(model);
  ctx.wire = build_wire_scene(model, ctx.contrast);

  ctx.dsw_test_scale.resize(ctx.surf.n_vertices());
  double sigma_w = model.sigma_white();
  for (int v = 0; v < ctx.surf.n_vertices(); ++v) {
    if (opts.coupling_sigma == AssemblyOptions::CouplingSigma::white_matter) {
      ctx.dsw_test_scale[v] = 1.0 / sigma_w;
    } else {
      double s_in = model.sigma_in(ctx.surf.vertex_surface[v]);
      if (s_in == 0.0) throw GeometryError("zero inner conductivity in coupling scale");
      ctx.dsw_test_scale[v] = 1.0 / s_in;
    }
  }

  build_surface_clouds(ctx.surf, opts, ctx.dsw_test_scale, ctx.surf_sources,
                       ctx.surf_normal_tests, ctx.dsw_tests);
  if (ctx.wire.n_segs() > 0)
    build_wire_charge_clouds(ctx.wire, opts, sigma_w, ctx.wire_tau, ctx.wire_rho_scaled,
                             ctx.wire_rho_chi, ctx.node_charges);
  return ctx;
}

AssemblyContext make_context(const HeadModel& model, const AssemblyOptions& opts) {
  ContrastField contrast;
  if (!model.wires.empty()) contrast = build_contrast(model);
  return make_context(model, contrast, opts);
}

}  // namespace fastfiber
