#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <utility>

#include "fastfiber/basis.hpp"

namespace fastfiber {

using SparseMat = Eigen::SparseMatrix<double>;

struct DipoleSource {
  Vec3 position;
  Vec3 moment;  // A m
};

// Dipole volume-potential kernels (point source, no volume quadrature):
// S_v j_p and its gradient at p.
double dipole_single_layer(const DipoleSource& d, const Vec3& p);
Vec3 dipole_grad_single_layer(const DipoleSource& d, const Vec3& p);

// The eight Galerkin quantities of the coupled system in dense form. Block
// signs live in full_matrix()/apply(): Z = [-G_ss + D_ss, -D_sw; -S_ws,
// G_ww + S_ww].
struct BlockSystem {
  Eigen::MatrixXd G_ss, D_ss, D_sw, S_ws, G_ww, S_ww;
  Eigen::VectorXd rhs_s, rhs_w;
  int n_s = 0, n_w = 0;

  // constant-charge null-space deflation on the outermost surface
  Eigen::VectorXd deflation;  // size n_s, zero if disabled
  double deflation_scale = 0.0;

  int n_total() const { return n_s + n_w; }
  Eigen::MatrixXd full_matrix(bool deflated = true) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& alpha, bool deflated = true) const;
  Eigen::VectorXd rhs() const;
  // dense storage in bytes of the assembled blocks
  std::size_t storage_bytes() const;
};

Eigen::SparseMatrix<double> assemble_surface_gram(const AssemblyContext& ctx);
Eigen::MatrixXd assemble_double_layer_ss(const AssemblyContext& ctx);
// returns {D_sw, S_ws}
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble_coupling(const AssemblyContext& ctx);
// returns {G_ww, S_ww}
std::pair<Eigen::SparseMatrix<double>, Eigen::MatrixXd> assemble_wire_blocks(
    const AssemblyContext& ctx);
// returns {rhs_s, rhs_w}
std::pair<Eigen::VectorXd, Eigen::VectorXd> assemble_rhs(const AssemblyContext& ctx,
                                                         const DipoleSource& source);

// All blocks (no right-hand side); deflation vector included.
BlockSystem assemble_dense_system(const AssemblyContext& ctx);

// Outer-surface mean vector and its penalty scale for the given context.
Eigen::VectorXd deflation_vector(const AssemblyContext& ctx);

// Direct solve of Z alpha = rhs through a partial-pivot factorization of the
// deflated matrix. Throws FactorizationError when the factorization cannot
// reach a small residual and DimensionError above the ceiling.
Eigen::VectorXd dense_solve(const BlockSystem& system, const Eigen::VectorXd& rhs,
                            int dense_ceiling = 20000);

// Exact couple-level Galerkin entries; the compressed near field and the
// acceptance checks share these with the dense assemblers.
double dss_entry(const AssemblyContext& ctx, int vi, int vj);
double dsw_entry(const AssemblyContext& ctx, int vi, int wj);
double sws_entry(const AssemblyContext& ctx, int wi, int vj);
double sww_entry(const AssemblyContext& ctx, int wi, int wj);

}  // namespace fastfiber
