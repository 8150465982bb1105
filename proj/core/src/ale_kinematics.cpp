#include "plateflow/ale_kinematics.hpp"

#include <vector>

#include "plateflow/errors.hpp"

namespace plateflow {

namespace {

using Trip = Eigen::Triplet<double>;

// Out-of-range tangential indices reflect oddly about the wall (ghost value
// equals minus the first inside value, putting zero on the wall itself).
struct Reflect {
  int idx;
  double sign;
};
Reflect reflect(int i, int lo, int hi) {
  if (i < lo) return {lo, -1.0};
  if (i > hi) return {hi, -1.0};
  return {i, 1.0};
}

}  // namespace

StaggeredOps StaggeredOps::build(const ReferenceGrid& g) {
  g.validate();
  StaggeredOps ops;
  const int nc = g.n_cells();
  const int nf = g.n_faces();
  const double hx = g.hx(), hy = g.hy(), hz = g.hz();

  std::vector<Trip> avg_t[3];
  std::vector<Trip> der_t[3][3];

  for (int k = 0; k < g.mz(); ++k)
    for (int j = 0; j < g.my(); ++j)
      for (int i = 0; i < g.mx(); ++i) {
        const int c = g.cell(i, j, k);

        // u1: faces (i, j, k) and (i+1, j, k) bound the cell in x.
        avg_t[0].emplace_back(c, g.iu1(i, j, k), 0.5);
        avg_t[0].emplace_back(c, g.iu1(i + 1, j, k), 0.5);
        der_t[0][0].emplace_back(c, g.iu1(i + 1, j, k), 1.0 / hx);
        der_t[0][0].emplace_back(c, g.iu1(i, j, k), -1.0 / hx);
        for (int fi : {i, i + 1}) {
          const auto jp = reflect(j + 1, 0, g.my() - 1), jm = reflect(j - 1, 0, g.my() - 1);
          der_t[0][1].emplace_back(c, g.iu1(fi, jp.idx, k), 0.5 * jp.sign / (2.0 * hy));
          der_t[0][1].emplace_back(c, g.iu1(fi, jm.idx, k), -0.5 * jm.sign / (2.0 * hy));
          const auto kp = reflect(k + 1, 0, g.mz() - 1), km = reflect(k - 1, 0, g.mz() - 1);
          der_t[0][2].emplace_back(c, g.iu1(fi, j, kp.idx), 0.5 * kp.sign / (2.0 * hz));
          der_t[0][2].emplace_back(c, g.iu1(fi, j, km.idx), -0.5 * km.sign / (2.0 * hz));
        }

        // u2: faces (i, j, k) and (i, j+1, k).
        avg_t[1].emplace_back(c, g.iu2(i, j, k), 0.5);
        avg_t[1].emplace_back(c, g.iu2(i, j + 1, k), 0.5);
        der_t[1][1].emplace_back(c, g.iu2(i, j + 1, k), 1.0 / hy);
        der_t[1][1].emplace_back(c, g.iu2(i, j, k), -1.0 / hy);
        for (int fj : {j, j + 1}) {
          const auto ip = reflect(i + 1, 0, g.mx() - 1), im = reflect(i - 1, 0, g.mx() - 1);
          der_t[1][0].emplace_back(c, g.iu2(ip.idx, fj, k), 0.5 * ip.sign / (2.0 * hx));
          der_t[1][0].emplace_back(c, g.iu2(im.idx, fj, k), -0.5 * im.sign / (2.0 * hx));
          const auto kp = reflect(k + 1, 0, g.mz() - 1), km = reflect(k - 1, 0, g.mz() - 1);
          der_t[1][2].emplace_back(c, g.iu2(i, fj, kp.idx), 0.5 * kp.sign / (2.0 * hz));
          der_t[1][2].emplace_back(c, g.iu2(i, fj, km.idx), -0.5 * km.sign / (2.0 * hz));
        }

        // u3: faces (i, j, k) and (i, j, k+1).
        avg_t[2].emplace_back(c, g.iu3(i, j, k), 0.5);
        avg_t[2].emplace_back(c, g.iu3(i, j, k + 1), 0.5);
        der_t[2][2].emplace_back(c, g.iu3(i, j, k + 1), 1.0 / hz);
        der_t[2][2].emplace_back(c, g.iu3(i, j, k), -1.0 / hz);
        for (int fk : {k, k + 1}) {
          const auto ip = reflect(i + 1, 0, g.mx() - 1), im = reflect(i - 1, 0, g.mx() - 1);
          der_t[2][0].emplace_back(c, g.iu3(ip.idx, j, fk), 0.5 * ip.sign / (2.0 * hx));
          der_t[2][0].emplace_back(c, g.iu3(im.idx, j, fk), -0.5 * im.sign / (2.0 * hx));
          const auto jp = reflect(j + 1, 0, g.my() - 1), jm = reflect(j - 1, 0, g.my() - 1);
          der_t[2][1].emplace_back(c, g.iu3(i, jp.idx, fk), 0.5 * jp.sign / (2.0 * hy));
          der_t[2][1].emplace_back(c, g.iu3(i, jm.idx, fk), -0.5 * jm.sign / (2.0 * hy));
        }
      }

  for (int comp = 0; comp < 3; ++comp) {
    ops.avg[comp].resize(nc, nf);
    ops.avg[comp].setFromTriplets(avg_t[comp].begin(), avg_t[comp].end());
    for (int dir = 0; dir < 3; ++dir) {
      ops.deriv[comp][dir].resize(nc, nf);
      ops.deriv[comp][dir].setFromTriplets(der_t[comp][dir].begin(), der_t[comp][dir].end());
    }
  }
  return ops;
}

PlateFieldOnGrid PlateFieldOnGrid::from_coeffs(const GalerkinBasis& basis,
                                               const Eigen::VectorXd& coeffs) {
  PlateFieldOnGrid f;
  const PlateGrid& g = basis.grid();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(basis.size());
  c.head(coeffs.size()) = coeffs;
  f.val = extend_with_boundary(g, basis.modes() * c);
  f.dx = extend_with_boundary(g, basis.modes_dx() * c);
  f.dy = extend_with_boundary(g, basis.modes_dy() * c);
  return f;
}

JacobianField JacobianField::build(const ReferenceGrid& grid, const PlateFieldOnGrid& eta,
                                   double j_floor) {
  JacobianField out;
  out.J.resize(grid.n_cells());
  out.min_J = std::numeric_limits<double>::infinity();
  out.max_J = -out.min_J;
  for (int k = 0; k < grid.mz(); ++k)
    for (int j = 0; j < grid.my(); ++j)
      for (int i = 0; i < grid.mx(); ++i) {
        const double J = 1.0 + eta.value(grid.plate, grid.xc(i), grid.yc(j));
        out.J[grid.cell(i, j, k)] = J;
        out.min_J = std::min(out.min_J, J);
        out.max_J = std::max(out.max_J, J);
      }
  if (!(out.min_J > j_floor))
    throw GeometryError("Jacobian floor violated: min J = " + std::to_string(out.min_J) +
                        " <= " + std::to_string(j_floor));
  return out;
}

TransformCoeffs TransformCoeffs::build(const ReferenceGrid& grid, const PlateFieldOnGrid& eta,
                                       double j_floor) {
  TransformCoeffs out;
  const int nc = grid.n_cells();
  out.J.resize(nc);
  out.A1.resize(nc);
  out.A2.resize(nc);
  out.A3.resize(nc);
  out.min_J = std::numeric_limits<double>::infinity();
  out.max_J = -out.min_J;
  for (int k = 0; k < grid.mz(); ++k)
    for (int j = 0; j < grid.my(); ++j)
      for (int i = 0; i < grid.mx(); ++i) {
        const double x = grid.xc(i), y = grid.yc(j);
        const double J = 1.0 + eta.value(grid.plate, x, y);
        const int c = grid.cell(i, j, k);
        out.J[c] = J;
        out.min_J = std::min(out.min_J, J);
        out.max_J = std::max(out.max_J, J);
        const double zp1 = grid.zc(k) + 1.0;
        out.A1[c] = -zp1 * eta.grad_x(grid.plate, x, y) / J;
        out.A2[c] = -zp1 * eta.grad_y(grid.plate, x, y) / J;
        out.A3[c] = 1.0 / J;
      }
  if (!(out.min_J > j_floor))
    throw GeometryError("Jacobian floor violated: min J = " + std::to_string(out.min_J) +
                        " <= " + std::to_string(j_floor));
  return out;
}

TransformedOps TransformedOps::build(const ReferenceGrid&, const StaggeredOps& ops,
                                     const TransformCoeffs& coeffs) {
  TransformedOps t;
  for (int c = 0; c < 3; ++c) {
    t.T[c][0] = ops.deriv[c][0] + SpMat(coeffs.A1.asDiagonal() * ops.deriv[c][2]);
    t.T[c][1] = ops.deriv[c][1] + SpMat(coeffs.A2.asDiagonal() * ops.deriv[c][2]);
    t.T[c][2] = coeffs.A3.asDiagonal() * ops.deriv[c][2];
  }
  return t;
}

Eigen::VectorXd transformed_divergence(const TransformedOps& ops, const Eigen::VectorXd& faces) {
  return ops.T[0][0] * faces + ops.T[1][1] * faces + ops.T[2][2] * faces;
}

std::array<std::array<Eigen::VectorXd, 3>, 3> transformed_gradient(const TransformedOps& ops,
                                                                   const Eigen::VectorXd& faces) {
  std::array<std::array<Eigen::VectorXd, 3>, 3> out;
  for (int c = 0; c < 3; ++c)
    for (int d = 0; d < 3; ++d) out[c][d] = ops.T[c][d] * faces;
  return out;
}

std::array<std::array<Eigen::VectorXd, 3>, 3> sym_gradient(const TransformedOps& ops,
                                                           const Eigen::VectorXd& faces) {
  auto grad = transformed_gradient(ops, faces);
  std::array<std::array<Eigen::VectorXd, 3>, 3> out;
  for (int c = 0; c < 3; ++c)
    for (int d = 0; d < 3; ++d) out[c][d] = 0.5 * (grad[c][d] + grad[d][c]);
  return out;
}

Eigen::VectorXd le_velocity_faces(const ReferenceGrid& g, const PlateFieldOnGrid& dteta) {
  Eigen::VectorXd faces = Eigen::VectorXd::Zero(g.n_faces());
  for (int k = 0; k <= g.mz(); ++k)
    for (int j = 0; j < g.my(); ++j)
      for (int i = 0; i < g.mx(); ++i)
        faces[g.iu3(i, j, k)] =
            (g.zface(k) + 1.0) * dteta.value(g.plate, g.xc(i), g.yc(j));
  return faces;
}

double geometric_identity_check(const ReferenceGrid& grid, const GalerkinBasis& basis,
                                const Eigen::VectorXd& eta_coeffs,
                                const Eigen::VectorXd& dteta_coeffs) {
  return geometric_identity_check(grid, PlateFieldOnGrid::from_coeffs(basis, eta_coeffs),
                                  PlateFieldOnGrid::from_coeffs(basis, dteta_coeffs));
}

double geometric_identity_check(const ReferenceGrid& grid, const PlateFieldOnGrid& eta,
                                const PlateFieldOnGrid& dteta) {
  const auto coeffs = TransformCoeffs::build(grid, eta, 0.0);
  const auto ops = StaggeredOps::build(grid);
  const auto tops = TransformedOps::build(grid, ops, coeffs);
  const Eigen::VectorXd w = le_velocity_faces(grid, dteta);
  const Eigen::VectorXd div = transformed_divergence(tops, w);
  double residual = 0.0;
  for (int k = 0; k < grid.mz(); ++k)
    for (int j = 0; j < grid.my(); ++j)
      for (int i = 0; i < grid.mx(); ++i) {
        const int c = grid.cell(i, j, k);
        const double target = dteta.value(grid.plate, grid.xc(i), grid.yc(j));
        residual = std::max(residual, std::abs(target - coeffs.J[c] * div[c]));
      }
  return residual;
}

}  // namespace plateflow
