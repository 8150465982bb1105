#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>

#include "plateflow/galerkin_basis.hpp"
#include "plateflow/plate_grid.hpp"

namespace plateflow {

// Fixed reference box Omega = Gamma x (-1, 0) with a MAC layout: u1 on
// x-faces, u2 on y-faces, u3 on z-faces, pressure at cell centers. The
// in-plane cells are the (nx+1) x (ny+1) dual cells of the plate grid, so the
// top face plane z = 0 tiles Gamma and interior face planes pass through the
// plate nodes.
struct ReferenceGrid {
  PlateGrid plate;
  int nz = 8;

  void validate() const {
    plate.validate();
    if (nz < 4) throw ParameterError("ReferenceGrid: nz >= 4 required");
  }

  int mx() const { return plate.nx + 1; }  // cells in x
  int my() const { return plate.ny + 1; }
  int mz() const { return nz; }
  double hx() const { return plate.hx(); }
  double hy() const { return plate.hy(); }
  double hz() const { return 1.0 / nz; }
  double cell_volume() const { return hx() * hy() * hz(); }

  double xc(int i) const { return (i + 0.5) * hx(); }
  double yc(int j) const { return (j + 0.5) * hy(); }
  double zc(int k) const { return -1.0 + (k + 0.5) * hz(); }
  double zface(int k) const { return -1.0 + k * hz(); }

  int n_cells() const { return mx() * my() * mz(); }
  int cell(int i, int j, int k) const { return i + mx() * (j + my() * k); }

  // Face vector layout: all u1 faces, then u2, then u3.
  int n_u1() const { return (mx() + 1) * my() * mz(); }
  int n_u2() const { return mx() * (my() + 1) * mz(); }
  int n_u3() const { return mx() * my() * (mz() + 1); }
  int n_faces() const { return n_u1() + n_u2() + n_u3(); }
  int iu1(int i, int j, int k) const { return i + (mx() + 1) * (j + my() * k); }
  int iu2(int i, int j, int k) const { return n_u1() + i + mx() * (j + (my() + 1) * k); }
  int iu3(int i, int j, int k) const { return n_u1() + n_u2() + i + mx() * (j + my() * k); }

  bool operator==(const ReferenceGrid&) const = default;
};

// Sparse kernels from the full face vector to cell centers: componentwise
// averages and raw derivatives. Tangential values beyond a no-slip wall enter
// as odd reflections (ghost = -inside).
struct StaggeredOps {
  SpMat avg[3];       // n_cells x n_faces
  SpMat deriv[3][3];  // deriv[component][direction]
  static StaggeredOps build(const ReferenceGrid& grid);
};

// Span plate field prepared for bilinear evaluation anywhere on Gamma; the
// gradient comes from the per-mode clamped gradients, not from re-differencing
// the interpolant.
struct PlateFieldOnGrid {
  Eigen::MatrixXd val, dx, dy;  // extended (nx+2) x (ny+2) nodal fields
  static PlateFieldOnGrid from_coeffs(const GalerkinBasis& basis, const Eigen::VectorXd& coeffs);
  double value(const PlateGrid& g, double x, double y) const { return bilinear_eval(g, val, x, y); }
  double grad_x(const PlateGrid& g, double x, double y) const { return bilinear_eval(g, dx, x, y); }
  double grad_y(const PlateGrid& g, double x, double y) const { return bilinear_eval(g, dy, x, y); }
};

// LE mapping A_eta(X, z) = (X, (z+1) eta(X) + z) and the LE velocity
// w = (0, 0, (z+1) dt_eta(X)).
inline std::array<double, 3> le_map(double eta_at_X, double x, double y, double z) {
  return {x, y, (z + 1.0) * eta_at_X + z};
}
inline std::array<double, 3> le_velocity(double dteta_at_X, double z) {
  return {0.0, 0.0, (z + 1.0) * dteta_at_X};
}

// Jacobian J = 1 + eta sampled at cell centers (independent of z); refuses
// construction when min J falls to the configured floor.
struct JacobianField {
  Eigen::VectorXd J;  // n_cells
  double min_J = 1.0, max_J = 1.0;
  static JacobianField build(const ReferenceGrid& grid, const PlateFieldOnGrid& eta,
                             double j_floor);
};

// Cell-centered data of the transformed gradient: the third row of
// (grad A_eta)^{-1}, Abar = (1/J) * (-(z+1) dx_eta, -(z+1) dy_eta, 1), plus J.
struct TransformCoeffs {
  Eigen::VectorXd J, A1, A2, A3;  // n_cells
  double min_J = 1.0, max_J = 1.0;
  static TransformCoeffs build(const ReferenceGrid& grid, const PlateFieldOnGrid& eta,
                               double j_floor);
};

// Cell-centered transformed gradient kernels:
//   grad^eta f = [dx f + A1 dz f | dy f + A2 dz f | A3 dz f].
// T[c][d] maps the face vector to (grad^eta f_c)_d at cell centers.
struct TransformedOps {
  SpMat T[3][3];
  static TransformedOps build(const ReferenceGrid& grid, const StaggeredOps& ops,
                              const TransformCoeffs& coeffs);
};

// trace(grad^eta f) at cell centers.
Eigen::VectorXd transformed_divergence(const TransformedOps& ops, const Eigen::VectorXd& faces);

// All nine entries of grad^eta f at cell centers; sym_gradient is the
// symmetric part.
std::array<std::array<Eigen::VectorXd, 3>, 3> transformed_gradient(const TransformedOps& ops,
                                                                   const Eigen::VectorXd& faces);
std::array<std::array<Eigen::VectorXd, 3>, 3> sym_gradient(const TransformedOps& ops,
                                                           const Eigen::VectorXd& faces);

// max over cells of |dt_eta - J (div^eta w^eta)_h| for the LE velocity built
// from dt_eta; the geometric identity dt J = J div^eta w^eta.
double geometric_identity_check(const ReferenceGrid& grid, const PlateFieldOnGrid& eta,
                                const PlateFieldOnGrid& dteta);
double geometric_identity_check(const ReferenceGrid& grid, const GalerkinBasis& basis,
                                const Eigen::VectorXd& eta_coeffs,
                                const Eigen::VectorXd& dteta_coeffs);

// Face vector of the LE velocity w = (0,0,(z+1) dt_eta) (u1 = u2 = 0).
Eigen::VectorXd le_velocity_faces(const ReferenceGrid& grid, const PlateFieldOnGrid& dteta);

}  // namespace plateflow
