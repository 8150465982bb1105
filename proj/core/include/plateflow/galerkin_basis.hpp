#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <memory>
#include <optional>
#include <string>

#include "plateflow/plate_grid.hpp"

namespace plateflow {

using SpMat = Eigen::SparseMatrix<double>;

// Discrete clamped-plate eigenbasis on Gamma.
//
// The biharmonic operator is assembled in Gram form B = D^T W D, where D is
// the 5-point Laplacian evaluated on interior and boundary nodes (boundary
// rows use the reflected ghost value encoding dw/dnu = 0) and W holds
// trapezoid quadrature weights. The interior stencil is the classic 13-point
// one; the Gram form makes the Rayleigh identity
//     xi_i = ||Lap_h w_i||^2_{L2,h} / ||w_i||^2_{L2,h}
// hold to eigensolver accuracy, which the norm conventions below rely on.
//
// Eigenpairs solve B w = xi Mq w with Mq = hx*hy*I; modes are L2_h-orthonormal
// and sorted ascending. Instances are immutable after build() and safe to
// share between threads.
class GalerkinBasis {
 public:
  static GalerkinBasis build(const PlateGrid& grid, int k_max);

  const PlateGrid& grid() const { return grid_; }
  int size() const { return static_cast<int>(xi_.size()); }

  // Ascending eigenvalues, units length^-4.
  const Eigen::VectorXd& eigenvalues() const { return xi_; }
  double xi(int i) const { return xi_[i]; }

  // Interior nodal values of the modes, one column per mode.
  const Eigen::MatrixXd& modes() const { return modes_; }
  Eigen::VectorXd mode_field(int i) const { return modes_.col(i); }

  // Clamped nodal gradients of every mode (zero on the boundary ring); these
  // are the "spectral" derivatives used for the LE transform coefficients.
  const Eigen::MatrixXd& modes_dx() const { return modes_dx_; }
  const Eigen::MatrixXd& modes_dy() const { return modes_dy_; }

  const SpMat& biharmonic() const { return B_; }
  const Eigen::SimplicialLDLT<SpMat>& biharmonic_factorization() const { return *B_ldlt_; }
  double quad_weight() const { return grid_.quad_weight(); }

  // L2_h projection coefficients ((f,w_1)_h, ..., (f,w_k)_h).
  Eigen::VectorXd project(const Eigen::VectorXd& interior_field) const;

  // Interior nodal field of sum_i coeffs_i w_i.
  Eigen::VectorXd nodal(const Eigen::VectorXd& coeffs) const;

  // (sum_i xi_i^{s/2} c_i^2)^{1/2} for s in [-2,2]; s=0 is the L2_h norm and
  // s=2 equals ||Lap_h f||_{L2,h} exactly on the span.
  double spectral_sobolev_norm(const Eigen::VectorXd& coeffs, double s) const;

  // Cache round trip; hits reproduce eigenvalues and modes bit-exactly.
  void save_cache(const std::string& path) const;
  static std::optional<GalerkinBasis> load_cache(const std::string& path, const PlateGrid& grid,
                                                 int k_max);

 private:
  GalerkinBasis() = default;
  void finalize();  // derived members from (grid_, xi_, modes_)

  PlateGrid grid_;
  Eigen::VectorXd xi_;
  Eigen::MatrixXd modes_;
  Eigen::MatrixXd modes_dx_, modes_dy_;
  SpMat B_;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> B_ldlt_;
};

// Assembled Gram-form clamped biharmonic for a grid (exposed for oracles).
SpMat assemble_clamped_biharmonic(const PlateGrid& grid);

// Interior nodal centered gradients with clamped boundary (gradient vanishes
// on the boundary ring).
void clamped_gradient(const PlateGrid& grid, const Eigen::VectorXd& interior, Eigen::VectorXd& dx,
                      Eigen::VectorXd& dy);

}  // namespace plateflow
