#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

#include "plateflow/ale_kinematics.hpp"
#include "plateflow/galerkin_basis.hpp"

namespace plateflow {

struct FluidState {
  Eigen::VectorXd faces;  // full face vector; no-slip rows are exact zeros and
                          // top u3 faces carry the beta expansion bit-exactly
  Eigen::VectorXd p;      // cell pressures, volume-weighted mean zero
  Eigen::VectorXd beta;   // plate-velocity coefficients v^{n+1}
  double solve_residual = 0.0;
};

struct FspInputs {
  Eigen::VectorXd u_prev_faces;                       // u^n
  Eigen::VectorXd eta_tilde_prev, eta_tilde_next;     // coefficients
  Eigen::VectorXd dteta_avg;                          // average-rate coefficients
  double dt = 1.0;
  double mu = 1.0;
  double j_floor = 1e-3;
};

struct FspSystem {
  SpMat K;              // KKT matrix over [u_int, beta | p | mean multiplier]
  Eigen::VectorXd rhs;
  SpMat A_visc_full;    // full-face viscous form 2 mu J^n D^{n+1}:D^{n+1}
  SpMat C_red;          // reduced convection block (for the skew check)
  Eigen::VectorXd M_prev, M_geo, M_next;  // diagonal face masses
  int n_red = 0;
  int n_cells = 0;
};

struct FspAudit {
  double slack = 0.0;  // S^{n+1} minus all retained terms; >= 0 up to rounding
  double lhs = 0.0, rhs = 0.0;
  double F_next = 0.0, jump_fluid = 0.0, jump_interface = 0.0, dissipation = 0.0;
  bool pass = false;
};

struct LiftResult {
  Eigen::VectorXd faces;
  double flux_removed = 0.0;  // relief-profile correction, zero for balanced data
  double div_residual = 0.0;  // max cell raw divergence
};

// Assembles and solves the piece-wise stationary fluid problem on the fixed
// reference grid: J^n-weighted time/convection/viscous terms with grad^{n+1}
// operators, the transformed divergence constraint of the previous domain,
// and the interface term exact in Galerkin coefficients (top-face u3 DOFs are
// eliminated in favor of beta). The convection block is skew by construction.
//
// Quadrature follows the staggered layout: time/geometric masses and the
// convection pair live at faces, the diagonal entries of D^{n+1} at cell
// centers, the off-diagonal shear entries at the matching edge midpoints, and
// the divergence constraint at cell centers. Every energy statement audited
// later is an algebraic identity of these forms, independent of the
// placement choices.
class FluidSubproblem {
 public:
  FluidSubproblem(const ReferenceGrid& grid, const GalerkinBasis& basis);

  const ReferenceGrid& grid() const { return grid_; }
  const StaggeredOps& ops() const { return ops_; }
  const Eigen::MatrixXd& top_eval() const { return top_eval_; }
  int n_interior() const { return n_interior_; }
  int n_reduced() const { return n_interior_ + k_; }

  // corrupt_convection symmetrizes the convection pair instead of
  // skew-symmetrizing it; debug hook for the mutation test.
  FspSystem assemble(const FspInputs& in, bool corrupt_convection = false) const;
  FluidState solve(const FspSystem& sys, double tol_solver) const;

  // Diagonal of the J-weighted face mass for a plate configuration.
  Eigen::VectorXd jacobian_face_weights(const Eigen::VectorXd& eta_coeffs) const;
  const Eigen::VectorXd& base_face_weights() const { return base_weights_; }

  // integral J |u|^2 with the given diagonal (no 1/2).
  static double weighted_kinetic(const Eigen::VectorXd& faces, const Eigen::VectorXd& M) {
    return faces.dot(M.cwiseProduct(faces));
  }

  FspAudit energy_audit(const FspSystem& sys, const FspInputs& in, const FluidState& out,
                        double plate_terms_next, double S_next, double tol_energy) const;

  // R_Gamma: divergence-free lift of (0,0,psi) on Gamma, zero on Sigma.
  LiftResult lift_boundary(const Eigen::VectorXd& psi_coeffs) const;

  Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const { return E_ * reduced; }

  void dump_system(const FspSystem& sys, const std::string& path) const;

 private:
  // Shear quadrature family: compact cross derivatives of two components at
  // the shared edge midpoints plus the averaged z-derivatives the transform
  // couples in.
  struct EdgeFamily {
    SpMat d_first, d_second;    // compact cross derivatives at the edges
    SpMat dz_first, dz_second;  // z-derivatives of both components at the edges
    Eigen::VectorXd weight;     // trapezoid volume weights
    Eigen::VectorXd x, y, zp1;  // edge midpoint coordinates (z+1 for Abar)
  };

  void build_edge_families();
  SpMat assemble_viscous(const PlateFieldOnGrid& eta_ops, const PlateFieldOnGrid& eta_weight,
                         double mu) const;
  SpMat assemble_convection(const Eigen::VectorXd& u_prev, const PlateFieldOnGrid& dteta,
                            const PlateFieldOnGrid& eta_next, const Eigen::VectorXd& M_prev) const;
  Eigen::VectorXd pad(const Eigen::VectorXd& coeffs) const;

  ReferenceGrid grid_;
  const GalerkinBasis* basis_;
  StaggeredOps ops_;
  int k_ = 0;
  int n_interior_ = 0;
  Eigen::MatrixXd top_eval_;  // (mx*my) x k mode values at top-face centers
  SpMat E_;                   // n_faces x (n_interior + k)
  Eigen::VectorXd base_weights_;
  EdgeFamily xy_, xz_, yz_;
};

}  // namespace plateflow
