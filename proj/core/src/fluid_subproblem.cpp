#include "plateflow/fluid_subproblem.hpp"

#include <Eigen/SparseLU>
#ifdef PLATEFLOW_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif
#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <vector>

#include "plateflow/errors.hpp"

namespace plateflow {

namespace {
using Trip = Eigen::Triplet<double>;

#ifdef PLATEFLOW_HAVE_UMFPACK
using DirectSolver = Eigen::UmfPackLU<SpMat>;
#else
using DirectSolver = Eigen::SparseLU<SpMat>;
#endif

// Direct solve of a saddle system whose handful of dense rows/columns (the
// beta coupling, one pinned pressure, the mean-pressure multiplier) would
// otherwise wreck the fill-reducing ordering: factor the sparse block, then
// eliminate the border through a small dense Schur complement.
Eigen::VectorXd solve_bordered(const SpMat& K, const Eigen::VectorXd& rhs,
                               const std::vector<int>& border, const std::string& what) {
  const int n = static_cast<int>(K.rows());
  const int nb = static_cast<int>(border.size());
  const int n0 = n - nb;
  std::vector<int> map(n, 0);
  for (int b = 0; b < nb; ++b) map[border[b]] = -1 - b;
  for (int i = 0, next = 0; i < n; ++i)
    if (map[i] >= 0) map[i] = next++;

  std::vector<Trip> t00;
  Eigen::MatrixXd K01 = Eigen::MatrixXd::Zero(n0, nb);
  Eigen::MatrixXd K10 = Eigen::MatrixXd::Zero(nb, n0);
  Eigen::MatrixXd K11 = Eigen::MatrixXd::Zero(nb, nb);
  t00.reserve(K.nonZeros());
  for (int o = 0; o < K.outerSize(); ++o)
    for (SpMat::InnerIterator it(K, o); it; ++it) {
      const int r = map[it.row()], c = map[it.col()];
      if (r >= 0 && c >= 0)
        t00.emplace_back(r, c, it.value());
      else if (r >= 0)
        K01(r, -1 - c) += it.value();
      else if (c >= 0)
        K10(-1 - r, c) += it.value();
      else
        K11(-1 - r, -1 - c) += it.value();
    }
  SpMat K00(n0, n0);
  K00.setFromTriplets(t00.begin(), t00.end());

  DirectSolver lu;
  lu.compute(K00);
  if (lu.info() != Eigen::Success)
    throw SolverError(what + ": sparse factorization of the leading block failed");

  Eigen::VectorXd b0(n0), b1(nb);
  for (int i = 0; i < n; ++i)
    (map[i] >= 0 ? b0[map[i]] : b1[-1 - map[i]]) = rhs[i];

  const Eigen::MatrixXd Y = lu.solve(K01);
  const Eigen::VectorXd t = lu.solve(b0);
  const Eigen::MatrixXd S = K11 - K10 * Y;
  Eigen::PartialPivLU<Eigen::MatrixXd> slu(S);
  const Eigen::VectorXd xb = slu.solve(b1 - K10 * t);
  const Eigen::VectorXd x0 = t - Y * xb;

  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = map[i] >= 0 ? x0[map[i]] : xb[-1 - map[i]];
  return x;
}

void append_block(std::vector<Trip>& trips, const SpMat& m, int row0, int col0,
                  bool transpose = false) {
  for (int o = 0; o < m.outerSize(); ++o)
    for (SpMat::InnerIterator it(m, o); it; ++it) {
      if (transpose)
        trips.emplace_back(col0 + static_cast<int>(it.col()), row0 + static_cast<int>(it.row()),
                           it.value());
      else
        trips.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()),
                           it.value());
    }
}

struct AbarAt {
  double A1, A2, A3, J;
};
AbarAt abar_at(const PlateGrid& pg, const PlateFieldOnGrid& eta, double x, double y, double zp1) {
  AbarAt out;
  out.J = 1.0 + eta.value(pg, x, y);
  out.A1 = -zp1 * eta.grad_x(pg, x, y) / out.J;
  out.A2 = -zp1 * eta.grad_y(pg, x, y) / out.J;
  out.A3 = 1.0 / out.J;
  return out;
}

SpMat gram(const SpMat& D, const Eigen::VectorXd& w) {
  return SpMat(D.transpose() * SpMat(w.asDiagonal() * D));
}

}  // namespace

FluidSubproblem::FluidSubproblem(const ReferenceGrid& grid, const GalerkinBasis& basis)
    : grid_(grid), basis_(&basis), ops_(StaggeredOps::build(grid)), k_(basis.size()) {
  if (!(grid.plate == basis.grid()))
    throw ParameterError("FluidSubproblem: reference grid and basis use different plate grids");

  const int nf = grid_.n_faces();
  const double vol = grid_.cell_volume();

  // Mode values at top-face in-plane centers.
  top_eval_.resize(grid_.mx() * grid_.my(), k_);
  for (int l = 0; l < k_; ++l) {
    const Eigen::MatrixXd ext = extend_with_boundary(grid_.plate, basis.mode_field(l));
    for (int j = 0; j < grid_.my(); ++j)
      for (int i = 0; i < grid_.mx(); ++i)
        top_eval_(i + j * grid_.mx(), l) = bilinear_eval(grid_.plate, ext, grid_.xc(i), grid_.yc(j));
  }

  // Face classification and the elimination map [u_int; beta] -> faces.
  std::vector<Trip> etrips;
  base_weights_.resize(nf);
  auto classify = [&](int face, bool own_wall, bool top, int i, int j) {
    base_weights_[face] = own_wall || top ? 0.5 * vol : vol;
    if (own_wall) return;
    if (top) {
      for (int l = 0; l < k_; ++l)
        etrips.emplace_back(face, /*col set later*/ -1 - l, top_eval_(i + j * grid_.mx(), l));
      return;
    }
    etrips.emplace_back(face, n_interior_++, 1.0);
  };
  for (int kk = 0; kk < grid_.mz(); ++kk)
    for (int j = 0; j < grid_.my(); ++j)
      for (int i = 0; i <= grid_.mx(); ++i)
        classify(grid_.iu1(i, j, kk), i == 0 || i == grid_.mx(), false, i, j);
  for (int kk = 0; kk < grid_.mz(); ++kk)
    for (int j = 0; j <= grid_.my(); ++j)
      for (int i = 0; i < grid_.mx(); ++i)
        classify(grid_.iu2(i, j, kk), j == 0 || j == grid_.my(), false, i, j);
  for (int kk = 0; kk <= grid_.mz(); ++kk)
    for (int j = 0; j < grid_.my(); ++j)
      for (int i = 0; i < grid_.mx(); ++i)
        classify(grid_.iu3(i, j, kk), kk == 0, kk == grid_.mz(), i, j);

  for (auto& t : etrips)
    if (t.col() < 0) t = Trip(t.row(), n_interior_ + (-1 - t.col()), t.value());
  E_.resize(nf, n_interior_ + k_);
  E_.setFromTriplets(etrips.begin(), etrips.end());

  build_edge_families();
}

void FluidSubproblem::build_edge_families() {
  const int mx = grid_.mx(), my = grid_.my(), mz = grid_.mz();
  const int nf = grid_.n_faces();
  const double hx = grid_.hx(), hy = grid_.hy(), hz = grid_.hz();
  const double vol = grid_.cell_volume();

  // Tangential values reflect oddly about walls; the interface plane z = 0
  // also pins the tangential components.
  auto refl = [](int i, int lo, int hi, int& idx, double& sign) {
    if (i < lo) {
      idx = lo;
      sign = -1.0;
    } else if (i > hi) {
      idx = hi;
      sign = -1.0;
    } else {
      idx = i;
      sign = 1.0;
    }
  };

  {  // xy edges: (i hx, j hy, zc(k)), i in [0,mx], j in [0,my], k in [0,mz)
    const int n = (mx + 1) * (my + 1) * mz;
    auto eid = [&](int i, int j, int k) { return i + (mx + 1) * (j + (my + 1) * k); };
    xy_.weight.resize(n);
    xy_.x.resize(n);
    xy_.y.resize(n);
    xy_.zp1.resize(n);
    std::vector<Trip> t_dy1, t_dx2, t_dz1, t_dz2;
    for (int k = 0; k < mz; ++k)
      for (int j = 0; j <= my; ++j)
        for (int i = 0; i <= mx; ++i) {
          const int e = eid(i, j, k);
          xy_.weight[e] = vol * (i == 0 || i == mx ? 0.5 : 1.0) * (j == 0 || j == my ? 0.5 : 1.0);
          xy_.x[e] = i * hx;
          xy_.y[e] = j * hy;
          xy_.zp1[e] = grid_.zc(k) + 1.0;
          {  // dy u1: (u1(i,j,k) - u1(i,j-1,k))/hy with odd reflection in j
            int ja, jb;
            double sa, sb;
            refl(j, 0, my - 1, ja, sa);
            refl(j - 1, 0, my - 1, jb, sb);
            t_dy1.emplace_back(e, grid_.iu1(i, ja, k), sa / hy);
            t_dy1.emplace_back(e, grid_.iu1(i, jb, k), -sb / hy);
          }
          {  // dx u2
            int ia, ib;
            double sa, sb;
            refl(i, 0, mx - 1, ia, sa);
            refl(i - 1, 0, mx - 1, ib, sb);
            t_dx2.emplace_back(e, grid_.iu2(ia, j, k), sa / hx);
            t_dx2.emplace_back(e, grid_.iu2(ib, j, k), -sb / hx);
          }
          for (int fj : {j - 1, j}) {  // dz u1 averaged over the two u1 rows
            int jj;
            double sj;
            refl(fj, 0, my - 1, jj, sj);
            int kp, km;
            double sp, sm;
            refl(k + 1, 0, mz - 1, kp, sp);
            refl(k - 1, 0, mz - 1, km, sm);
            t_dz1.emplace_back(e, grid_.iu1(i, jj, kp), 0.5 * sj * sp / (2.0 * hz));
            t_dz1.emplace_back(e, grid_.iu1(i, jj, km), -0.5 * sj * sm / (2.0 * hz));
          }
          for (int fi : {i - 1, i}) {  // dz u2
            int ii;
            double si;
            refl(fi, 0, mx - 1, ii, si);
            int kp, km;
            double sp, sm;
            refl(k + 1, 0, mz - 1, kp, sp);
            refl(k - 1, 0, mz - 1, km, sm);
            t_dz2.emplace_back(e, grid_.iu2(ii, j, kp), 0.5 * si * sp / (2.0 * hz));
            t_dz2.emplace_back(e, grid_.iu2(ii, j, km), -0.5 * si * sm / (2.0 * hz));
          }
        }
    xy_.d_first.resize(n, nf);
    xy_.d_first.setFromTriplets(t_dy1.begin(), t_dy1.end());
    xy_.d_second.resize(n, nf);
    xy_.d_second.setFromTriplets(t_dx2.begin(), t_dx2.end());
    xy_.dz_first.resize(n, nf);
    xy_.dz_first.setFromTriplets(t_dz1.begin(), t_dz1.end());
    xy_.dz_second.resize(n, nf);
    xy_.dz_second.setFromTriplets(t_dz2.begin(), t_dz2.end());
  }

  // xz and yz edges share the same construction with roles swapped; the
  // z-derivative of u3 at its own face planes uses one-sided differences at
  // the bottom wall and at the coupled interface.
  auto build_wall = [&](bool is_xz) {
    EdgeFamily fam;
    const int mA = is_xz ? mx : my;      // direction of the tangential axis
    const int mB = is_xz ? my : mx;      // remaining in-plane axis (cells)
    const double hA = is_xz ? hx : hy;
    const int n = (mA + 1) * mB * (mz + 1);
    auto eid = [&](int a, int b, int k) { return a + (mA + 1) * (b + mB * k); };
    auto tang_face = [&](int a, int b, int k) {  // u1 for xz, u2 for yz
      return is_xz ? grid_.iu1(a, b, k) : grid_.iu2(b, a, k);
    };
    auto w_face = [&](int a, int b, int k) {  // u3 face indexed along the A axis
      return is_xz ? grid_.iu3(a, b, k) : grid_.iu3(b, a, k);
    };
    fam.weight.resize(n);
    fam.x.resize(n);
    fam.y.resize(n);
    fam.zp1.resize(n);
    std::vector<Trip> t_dzt, t_daw, t_dzw;
    for (int k = 0; k <= mz; ++k)
      for (int b = 0; b < mB; ++b)
        for (int a = 0; a <= mA; ++a) {
          const int e = eid(a, b, k);
          fam.weight[e] = vol * (a == 0 || a == mA ? 0.5 : 1.0) * (k == 0 || k == mz ? 0.5 : 1.0);
          fam.x[e] = is_xz ? a * hx : grid_.xc(b);
          fam.y[e] = is_xz ? grid_.yc(b) : a * hy;
          fam.zp1[e] = grid_.zface(k) + 1.0;
          {  // dz of the tangential component, odd reflection in k
            int ka, kb;
            double sa, sb;
            refl(k, 0, mz - 1, ka, sa);
            refl(k - 1, 0, mz - 1, kb, sb);
            t_dzt.emplace_back(e, tang_face(a, b, ka), sa / hz);
            t_dzt.emplace_back(e, tang_face(a, b, kb), -sb / hz);
          }
          {  // dA u3, odd reflection across the side walls
            int aa, ab;
            double sa, sb;
            refl(a, 0, mA - 1, aa, sa);
            refl(a - 1, 0, mA - 1, ab, sb);
            t_daw.emplace_back(e, w_face(aa, b, k), sa / hA);
            t_daw.emplace_back(e, w_face(ab, b, k), -sb / hA);
          }
          for (int fa : {a - 1, a}) {  // dz u3, one-sided at bottom and interface
            int ai;
            double si;
            refl(fa, 0, mA - 1, ai, si);
            if (k == 0) {
              t_dzw.emplace_back(e, w_face(ai, b, 1), 0.5 * si / hz);
              t_dzw.emplace_back(e, w_face(ai, b, 0), -0.5 * si / hz);
            } else if (k == mz) {
              t_dzw.emplace_back(e, w_face(ai, b, mz), 0.5 * si / hz);
              t_dzw.emplace_back(e, w_face(ai, b, mz - 1), -0.5 * si / hz);
            } else {
              t_dzw.emplace_back(e, w_face(ai, b, k + 1), 0.5 * si / (2.0 * hz));
              t_dzw.emplace_back(e, w_face(ai, b, k - 1), -0.5 * si / (2.0 * hz));
            }
          }
        }
    fam.d_first.resize(n, nf);  // dz of the tangential component
    fam.d_first.setFromTriplets(t_dzt.begin(), t_dzt.end());
    fam.d_second.resize(n, nf);  // dA u3
    fam.d_second.setFromTriplets(t_daw.begin(), t_daw.end());
    fam.dz_second.resize(n, nf);  // dz u3
    fam.dz_second.setFromTriplets(t_dzw.begin(), t_dzw.end());
    fam.dz_first = fam.d_first;  // the tangential dz is already a z-derivative
    return fam;
  };
  xz_ = build_wall(true);
  yz_ = build_wall(false);
}

Eigen::VectorXd FluidSubproblem::pad(const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() > k_)
    throw ParameterError("FluidSubproblem: coefficient vector longer than basis");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k_);
  out.head(coeffs.size()) = coeffs;
  return out;
}

Eigen::VectorXd FluidSubproblem::jacobian_face_weights(const Eigen::VectorXd& eta_coeffs) const {
  const auto eta = PlateFieldOnGrid::from_coeffs(*basis_, pad(eta_coeffs));
  Eigen::VectorXd w = base_weights_;
  const PlateGrid& pg = grid_.plate;
  for (int kk = 0; kk < grid_.mz(); ++kk)
    for (int j = 0; j < grid_.my(); ++j)
      for (int i = 0; i <= grid_.mx(); ++i)
        w[grid_.iu1(i, j, kk)] *= 1.0 + eta.value(pg, i * grid_.hx(), grid_.yc(j));
  for (int kk = 0; kk < grid_.mz(); ++kk)
    for (int j = 0; j <= grid_.my(); ++j)
      for (int i = 0; i < grid_.mx(); ++i)
        w[grid_.iu2(i, j, kk)] *= 1.0 + eta.value(pg, grid_.xc(i), j * grid_.hy());
  for (int kk = 0; kk <= grid_.mz(); ++kk)
    for (int j = 0; j < grid_.my(); ++j)
      for (int i = 0; i < grid_.mx(); ++i)
        w[grid_.iu3(i, j, kk)] *= 1.0 + eta.value(pg, grid_.xc(i), grid_.yc(j));
  return w;
}

SpMat FluidSubproblem::assemble_viscous(const PlateFieldOnGrid& eta_ops,
                                        const PlateFieldOnGrid& eta_weight, double mu) const {
  const PlateGrid& pg = grid_.plate;
  const int nf = grid_.n_faces();
  const int nc = grid_.n_cells();
  const double vol = grid_.cell_volume();

  SpMat A(nf, nf);

  {  // diagonal entries at cell centers
    Eigen::VectorXd A1(nc), A2(nc), A3(nc), Jw(nc);
    for (int k = 0; k < grid_.mz(); ++k)
      for (int j = 0; j < grid_.my(); ++j)
        for (int i = 0; i < grid_.mx(); ++i) {
          const int c = grid_.cell(i, j, k);
          const auto ab =
              abar_at(pg, eta_ops, grid_.xc(i), grid_.yc(j), grid_.zc(k) + 1.0);
          A1[c] = ab.A1;
          A2[c] = ab.A2;
          A3[c] = ab.A3;
          Jw[c] = vol * (1.0 + eta_weight.value(pg, grid_.xc(i), grid_.yc(j)));
        }
    const SpMat D11 = ops_.deriv[0][0] + SpMat(A1.asDiagonal() * ops_.deriv[0][2]);
    const SpMat D22 = ops_.deriv[1][1] + SpMat(A2.asDiagonal() * ops_.deriv[1][2]);
    const SpMat D33 = SpMat(A3.asDiagonal() * ops_.deriv[2][2]);
    const Eigen::VectorXd w = 2.0 * mu * Jw;
    A = gram(D11, w) + gram(D22, w) + gram(D33, w);
  }

  auto shear = [&](const EdgeFamily& fam, int first_abar, int second_abar) {
    const int n = static_cast<int>(fam.weight.size());
    Eigen::VectorXd Af(n), As(n), Jw(n);
    for (int e = 0; e < n; ++e) {
      const auto ab = abar_at(pg, eta_ops, fam.x[e], fam.y[e], fam.zp1[e]);
      const double picks[3] = {ab.A1, ab.A2, ab.A3};
      Af[e] = picks[first_abar];
      As[e] = picks[second_abar];
      Jw[e] = fam.weight[e] * (1.0 + eta_weight.value(pg, fam.x[e], fam.y[e]));
    }
    const SpMat D = 0.5 * (fam.d_first + SpMat(Af.asDiagonal() * fam.dz_first) + fam.d_second +
                           SpMat(As.asDiagonal() * fam.dz_second));
    return gram(D, Eigen::VectorXd(4.0 * mu * Jw));  // 2 mu * 2 (symmetric pair)
  };
  // D12 = (dy u1 + A2 dz u1 + dx u2 + A1 dz u2)/2
  A = A + shear(xy_, 1, 0);
  // D13 = (A3 dz u1 + dx u3 + A1 dz u3)/2, with d_first = dz u1 scaled by A3
  {
    const EdgeFamily& fam = xz_;
    const int n = static_cast<int>(fam.weight.size());
    Eigen::VectorXd A1(n), A3(n), Jw(n);
    for (int e = 0; e < n; ++e) {
      const auto ab = abar_at(pg, eta_ops, fam.x[e], fam.y[e], fam.zp1[e]);
      A1[e] = ab.A1;
      A3[e] = ab.A3;
      Jw[e] = fam.weight[e] * (1.0 + eta_weight.value(pg, fam.x[e], fam.y[e]));
    }
    const SpMat D = 0.5 * (SpMat(A3.asDiagonal() * fam.d_first) + fam.d_second +
                           SpMat(A1.asDiagonal() * fam.dz_second));
    A = A + gram(D, Eigen::VectorXd(4.0 * mu * Jw));
  }
  // D23 = (A3 dz u2 + dy u3 + A2 dz u3)/2
  {
    const EdgeFamily& fam = yz_;
    const int n = static_cast<int>(fam.weight.size());
    Eigen::VectorXd A2(n), A3(n), Jw(n);
    for (int e = 0; e < n; ++e) {
      const auto ab = abar_at(pg, eta_ops, fam.x[e], fam.y[e], fam.zp1[e]);
      A2[e] = ab.A2;
      A3[e] = ab.A3;
      Jw[e] = fam.weight[e] * (1.0 + eta_weight.value(pg, fam.x[e], fam.y[e]));
    }
    const SpMat D = 0.5 * (SpMat(A3.asDiagonal() * fam.d_first) + fam.d_second +
                           SpMat(A2.asDiagonal() * fam.dz_second));
    A = A + gram(D, Eigen::VectorXd(4.0 * mu * Jw));
  }
  A.prune(0.0);
  return A;
}

SpMat FluidSubproblem::assemble_convection(const Eigen::VectorXd& u_prev,
                                           const PlateFieldOnGrid& dteta,
                                           const PlateFieldOnGrid& eta_next,
                                           const Eigen::VectorXd& M_prev) const {
  const PlateGrid& pg = grid_.plate;
  const int mx = grid_.mx(), my = grid_.my(), mz = grid_.mz();
  const double hx = grid_.hx(), hy = grid_.hy(), hz = grid_.hz();
  std::vector<Trip> trips;
  trips.reserve(6 * grid_.n_faces());

  // Centered derivative of a component along an axis at its own face, with
  // odd ghost reflection across tangential walls.
  auto add_tangential = [&](std::vector<Trip>& out, int row, double coeff, int idx, int lo, int hi,
                            auto face_of) {
    auto refl = [&](int i, double& sign) {
      if (i < lo) {
        sign = -1.0;
        return lo;
      }
      if (i > hi) {
        sign = -1.0;
        return hi;
      }
      sign = 1.0;
      return i;
    };
    double sp = 1.0, sm = 1.0;
    const int ip = refl(idx + 1, sp);
    const int im = refl(idx - 1, sm);
    out.emplace_back(row, face_of(ip), coeff * sp);
    out.emplace_back(row, face_of(im), -coeff * sm);
  };

  // u1 rows (interior x-faces only; wall rows are eliminated).
  for (int k = 0; k < mz; ++k)
    for (int j = 0; j < my; ++j)
      for (int i = 1; i < mx; ++i) {
        const int f = grid_.iu1(i, j, k);
        const double x = i * hx, y = grid_.yc(j), zp1 = grid_.zc(k) + 1.0;
        const double a1 = u_prev[f];
        const double a2 = 0.25 * (u_prev[grid_.iu2(i - 1, j, k)] + u_prev[grid_.iu2(i - 1, j + 1, k)] +
                                  u_prev[grid_.iu2(i, j, k)] + u_prev[grid_.iu2(i, j + 1, k)]);
        const double a3 = 0.25 * (u_prev[grid_.iu3(i - 1, j, k)] + u_prev[grid_.iu3(i - 1, j, k + 1)] +
                                  u_prev[grid_.iu3(i, j, k)] + u_prev[grid_.iu3(i, j, k + 1)]) -
                          zp1 * dteta.value(pg, x, y);
        const auto ab = abar_at(pg, eta_next, x, y, zp1);
        const double az = a1 * ab.A1 + a2 * ab.A2 + a3 * ab.A3;
        const double wJ = M_prev[f];
        trips.emplace_back(f, grid_.iu1(i + 1, j, k), wJ * a1 / (2.0 * hx));
        trips.emplace_back(f, grid_.iu1(i - 1, j, k), -wJ * a1 / (2.0 * hx));
        add_tangential(trips, f, wJ * a2 / (2.0 * hy), j, 0, my - 1,
                       [&](int jj) { return grid_.iu1(i, jj, k); });
        add_tangential(trips, f, wJ * az / (2.0 * hz), k, 0, mz - 1,
                       [&](int kk) { return grid_.iu1(i, j, kk); });
      }

  // u2 rows.
  for (int k = 0; k < mz; ++k)
    for (int j = 1; j < my; ++j)
      for (int i = 0; i < mx; ++i) {
        const int f = grid_.iu2(i, j, k);
        const double x = grid_.xc(i), y = j * hy, zp1 = grid_.zc(k) + 1.0;
        const double a1 = 0.25 * (u_prev[grid_.iu1(i, j - 1, k)] + u_prev[grid_.iu1(i + 1, j - 1, k)] +
                                  u_prev[grid_.iu1(i, j, k)] + u_prev[grid_.iu1(i + 1, j, k)]);
        const double a2 = u_prev[f];
        const double a3 = 0.25 * (u_prev[grid_.iu3(i, j - 1, k)] + u_prev[grid_.iu3(i, j - 1, k + 1)] +
                                  u_prev[grid_.iu3(i, j, k)] + u_prev[grid_.iu3(i, j, k + 1)]) -
                          zp1 * dteta.value(pg, x, y);
        const auto ab = abar_at(pg, eta_next, x, y, zp1);
        const double az = a1 * ab.A1 + a2 * ab.A2 + a3 * ab.A3;
        const double wJ = M_prev[f];
        add_tangential(trips, f, wJ * a1 / (2.0 * hx), i, 0, mx - 1,
                       [&](int ii) { return grid_.iu2(ii, j, k); });
        trips.emplace_back(f, grid_.iu2(i, j + 1, k), wJ * a2 / (2.0 * hy));
        trips.emplace_back(f, grid_.iu2(i, j - 1, k), -wJ * a2 / (2.0 * hy));
        add_tangential(trips, f, wJ * az / (2.0 * hz), k, 0, mz - 1,
                       [&](int kk) { return grid_.iu2(i, j, kk); });
      }

  // u3 rows, including the coupled interface faces; dz uses a one-sided
  // difference at the interface.
  for (int k = 1; k <= mz; ++k)
    for (int j = 0; j < my; ++j)
      for (int i = 0; i < mx; ++i) {
        const int f = grid_.iu3(i, j, k);
        const double x = grid_.xc(i), y = grid_.yc(j), zp1 = grid_.zface(k) + 1.0;
        const int kc = std::min(k, mz - 1);  // cell layer(s) adjacent to the face
        const int kb = std::max(k - 1, 0);
        double a1, a2;
        if (k == mz) {
          a1 = 0.5 * (u_prev[grid_.iu1(i, j, mz - 1)] + u_prev[grid_.iu1(i + 1, j, mz - 1)]);
          a2 = 0.5 * (u_prev[grid_.iu2(i, j, mz - 1)] + u_prev[grid_.iu2(i, j + 1, mz - 1)]);
        } else {
          a1 = 0.25 * (u_prev[grid_.iu1(i, j, kb)] + u_prev[grid_.iu1(i + 1, j, kb)] +
                       u_prev[grid_.iu1(i, j, kc)] + u_prev[grid_.iu1(i + 1, j, kc)]);
          a2 = 0.25 * (u_prev[grid_.iu2(i, j, kb)] + u_prev[grid_.iu2(i, j + 1, kb)] +
                       u_prev[grid_.iu2(i, j, kc)] + u_prev[grid_.iu2(i, j + 1, kc)]);
        }
        const double a3 = u_prev[f] - zp1 * dteta.value(pg, x, y);
        const auto ab = abar_at(pg, eta_next, x, y, zp1);
        const double az = a1 * ab.A1 + a2 * ab.A2 + a3 * ab.A3;
        const double wJ = M_prev[f];
        add_tangential(trips, f, wJ * a1 / (2.0 * hx), i, 0, mx - 1,
                       [&](int ii) { return grid_.iu3(ii, j, k); });
        add_tangential(trips, f, wJ * a2 / (2.0 * hy), j, 0, my - 1,
                       [&](int jj) { return grid_.iu3(i, jj, k); });
        if (k == mz) {
          trips.emplace_back(f, grid_.iu3(i, j, mz), wJ * az / hz);
          trips.emplace_back(f, grid_.iu3(i, j, mz - 1), -wJ * az / hz);
        } else {
          trips.emplace_back(f, grid_.iu3(i, j, k + 1), wJ * az / (2.0 * hz));
          trips.emplace_back(f, grid_.iu3(i, j, k - 1), -wJ * az / (2.0 * hz));
        }
      }

  SpMat K(grid_.n_faces(), grid_.n_faces());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

FspSystem FluidSubproblem::assemble(const FspInputs& in, bool corrupt_convection) const {
  const int nf = grid_.n_faces();
  const int nc = grid_.n_cells();
  const double vol = grid_.cell_volume();
  if (in.u_prev_faces.size() != nf) throw ParameterError("assemble_fsp: u_prev has wrong size");
  if (!(in.dt > 0.0)) throw ParameterError("assemble_fsp: dt must be positive");

  const Eigen::VectorXd eta_prev_c = pad(in.eta_tilde_prev);
  const Eigen::VectorXd eta_next_c = pad(in.eta_tilde_next);
  const Eigen::VectorXd d_avg = pad(in.dteta_avg);

  const auto eta_prev = PlateFieldOnGrid::from_coeffs(*basis_, eta_prev_c);
  const auto eta_next = PlateFieldOnGrid::from_coeffs(*basis_, eta_next_c);
  const auto dteta = PlateFieldOnGrid::from_coeffs(*basis_, d_avg);

  const auto coeff_prev = TransformCoeffs::build(grid_, eta_prev, in.j_floor);
  TransformCoeffs::build(grid_, eta_next, in.j_floor);  // floor guard on the new geometry

  FspSystem sys;
  sys.n_red = n_reduced();
  sys.n_cells = nc;
  sys.M_prev = jacobian_face_weights(eta_prev_c);
  sys.M_next = jacobian_face_weights(eta_next_c);
  sys.M_geo = sys.M_next - sys.M_prev;

  const SpMat K_adv = assemble_convection(in.u_prev_faces, dteta, eta_next, sys.M_prev);
  SpMat C_full = corrupt_convection ? SpMat(0.5 * (K_adv + SpMat(K_adv.transpose())))
                                    : SpMat(0.5 * (K_adv - SpMat(K_adv.transpose())));
  C_full.prune(0.0);

  sys.A_visc_full = assemble_viscous(eta_next, eta_prev, in.mu);

  SpMat A_full = C_full + sys.A_visc_full;
  const Eigen::VectorXd diag_mass = sys.M_prev / in.dt + 0.5 * sys.M_geo / in.dt;
  {
    std::vector<Trip> dt_trips;
    dt_trips.reserve(nf);
    for (int f = 0; f < nf; ++f) dt_trips.emplace_back(f, f, diag_mass[f]);
    SpMat D(nf, nf);
    D.setFromTriplets(dt_trips.begin(), dt_trips.end());
    A_full = A_full + D;
  }

  SpMat A_red = SpMat(E_.transpose() * SpMat(A_full * E_));
  sys.C_red = SpMat(E_.transpose() * SpMat(C_full * E_));

  // Transformed divergence of the previous domain, volume-weighted rows.
  SpMat B_full = SpMat(ops_.deriv[0][0] + SpMat(coeff_prev.A1.asDiagonal() * ops_.deriv[0][2])) +
                 SpMat(ops_.deriv[1][1] + SpMat(coeff_prev.A2.asDiagonal() * ops_.deriv[1][2])) +
                 SpMat(coeff_prev.A3.asDiagonal() * ops_.deriv[2][2]);
  B_full.prune(0.0);
  Eigen::VectorXd volv = Eigen::VectorXd::Constant(nc, vol);
  SpMat B_red = SpMat(volv.asDiagonal() * SpMat(B_full * E_));

  const int n_red = sys.n_red;
  const int total = n_red + nc + 1;
  std::vector<Trip> ktrips;
  ktrips.reserve(A_red.nonZeros() + 2 * B_red.nonZeros() + 2 * nc + k_);
  append_block(ktrips, A_red, 0, 0);
  for (int l = 0; l < k_; ++l)
    ktrips.emplace_back(n_interior_ + l, n_interior_ + l, 1.0 / in.dt);  // interface Gram = I
  append_block(ktrips, B_red, n_red, 0);
  append_block(ktrips, B_red, n_red, 0, /*transpose=*/true);
  for (int c = 0; c < nc; ++c) {
    ktrips.emplace_back(n_red + c, n_red + nc, vol);
    ktrips.emplace_back(n_red + nc, n_red + c, vol);
  }
  sys.K.resize(total, total);
  sys.K.setFromTriplets(ktrips.begin(), ktrips.end());
  sys.K.prune(0.0);

  sys.rhs = Eigen::VectorXd::Zero(total);
  sys.rhs.head(n_red) = E_.transpose() * (sys.M_prev.cwiseProduct(in.u_prev_faces) / in.dt);
  sys.rhs.segment(n_interior_, k_) += d_avg / in.dt;

  if (!sys.rhs.allFinite() ||
      !Eigen::Map<const Eigen::VectorXd>(sys.K.valuePtr(), sys.K.nonZeros()).allFinite())
    throw NumericError("assemble_fsp: non-finite entries in the assembled system");
  return sys;
}

FluidState FluidSubproblem::solve(const FspSystem& sys, double tol_solver) const {
  std::vector<int> border;
  for (int l = 0; l < k_; ++l) border.push_back(n_interior_ + l);
  border.push_back(sys.n_red);             // pinned pressure cell
  border.push_back(sys.n_red + sys.n_cells);  // mean-pressure multiplier
  const Eigen::VectorXd x = solve_bordered(sys.K, sys.rhs, border, "solve_fsp");

  FluidState out;
  const double scale = std::max(1.0, sys.rhs.norm());
  out.solve_residual = (sys.K * x - sys.rhs).norm() / scale;
  if (!(out.solve_residual <= tol_solver))
    throw SolverError("solve_fsp: residual " + std::to_string(out.solve_residual) +
                      " exceeds tolerance " + std::to_string(tol_solver));
  const Eigen::VectorXd u_red = x.head(sys.n_red);
  out.faces = E_ * u_red;
  out.beta = u_red.tail(k_);
  out.p = x.segment(sys.n_red, sys.n_cells);
  return out;
}

FspAudit FluidSubproblem::energy_audit(const FspSystem& sys, const FspInputs& in,
                                       const FluidState& out, double plate_terms_next,
                                       double S_next, double tol_energy) const {
  FspAudit audit;
  const Eigen::VectorXd d_avg = pad(in.dteta_avg);
  audit.F_next = 0.5 * out.beta.squaredNorm() + plate_terms_next +
                 0.5 * weighted_kinetic(out.faces, sys.M_next);
  const Eigen::VectorXd du = out.faces - in.u_prev_faces;
  audit.jump_fluid = 0.5 * weighted_kinetic(du, sys.M_prev);
  audit.jump_interface = 0.5 * (out.beta - d_avg).squaredNorm();
  audit.dissipation = in.dt * out.faces.dot(sys.A_visc_full * out.faces);
  audit.lhs = audit.F_next + audit.jump_fluid + audit.jump_interface + audit.dissipation;
  audit.rhs = S_next;
  audit.slack = audit.rhs - audit.lhs;
  audit.pass = audit.slack >= -tol_energy * std::max(1.0, std::abs(audit.rhs));
  return audit;
}

LiftResult FluidSubproblem::lift_boundary(const Eigen::VectorXd& psi_coeffs) const {
  const int nf = grid_.n_faces();
  const int nc = grid_.n_cells();
  const double vol = grid_.cell_volume();
  const double face_area = grid_.hx() * grid_.hy();

  Eigen::VectorXd top = top_eval_ * pad(psi_coeffs);
  Eigen::VectorXd relief(grid_.mx() * grid_.my());
  for (int j = 0; j < grid_.my(); ++j)
    for (int i = 0; i < grid_.mx(); ++i)
      relief[i + j * grid_.mx()] = std::sin(M_PI * grid_.xc(i) / grid_.plate.Lx) *
                                   std::sin(M_PI * grid_.yc(j) / grid_.plate.Ly);
  const double flux = face_area * top.sum();
  const double relief_flux = face_area * relief.sum();
  LiftResult res;
  res.flux_removed = flux;
  top -= (flux / relief_flux) * relief;

  Eigen::VectorXd u_data = Eigen::VectorXd::Zero(nf);
  for (int j = 0; j < grid_.my(); ++j)
    for (int i = 0; i < grid_.mx(); ++i)
      u_data[grid_.iu3(i, j, grid_.mz())] = top[i + j * grid_.mx()];

  // eta == 0 geometry; a face mass keeps the quadratic form definite.
  const PlateFieldOnGrid flat{Eigen::MatrixXd::Zero(grid_.plate.nx + 2, grid_.plate.ny + 2),
                              Eigen::MatrixXd::Zero(grid_.plate.nx + 2, grid_.plate.ny + 2),
                              Eigen::MatrixXd::Zero(grid_.plate.nx + 2, grid_.plate.ny + 2)};
  SpMat A_full = assemble_viscous(flat, flat, 0.5);
  {
    std::vector<Trip> trips;
    for (int f = 0; f < nf; ++f) trips.emplace_back(f, f, base_weights_[f]);
    SpMat M(nf, nf);
    M.setFromTriplets(trips.begin(), trips.end());
    A_full = A_full + M;
  }
  SpMat B_full = ops_.deriv[0][0] + ops_.deriv[1][1] + ops_.deriv[2][2];

  const SpMat EI = E_.leftCols(n_interior_);
  SpMat A_red = SpMat(EI.transpose() * SpMat(A_full * EI));
  Eigen::VectorXd volv = Eigen::VectorXd::Constant(nc, vol);
  SpMat B_red = SpMat(volv.asDiagonal() * SpMat(B_full * EI));

  const int total = n_interior_ + nc + 1;
  std::vector<Trip> ktrips;
  append_block(ktrips, A_red, 0, 0);
  append_block(ktrips, B_red, n_interior_, 0);
  append_block(ktrips, B_red, n_interior_, 0, true);
  for (int c = 0; c < nc; ++c) {
    ktrips.emplace_back(n_interior_ + c, n_interior_ + nc, vol);
    ktrips.emplace_back(n_interior_ + nc, n_interior_ + c, vol);
  }
  SpMat K(total, total);
  K.setFromTriplets(ktrips.begin(), ktrips.end());

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total);
  rhs.head(n_interior_) = -(EI.transpose() * (A_full * u_data));
  rhs.segment(n_interior_, nc) = -(volv.asDiagonal() * (B_full * u_data));

  const std::vector<int> border = {n_interior_, n_interior_ + nc};
  const Eigen::VectorXd x = solve_bordered(K, rhs, border, "lift_boundary");
  res.faces = EI * x.head(n_interior_) + u_data;
  res.div_residual = (B_full * res.faces).cwiseAbs().maxCoeff();
  return res;
}

void FluidSubproblem::dump_system(const FspSystem& sys, const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("dump_system: cannot write " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << sys.K.rows() << " " << sys.K.cols() << " " << sys.K.nonZeros() << "\n";
  char buf[64];
  for (int o = 0; o < sys.K.outerSize(); ++o)
    for (SpMat::InnerIterator it(sys.K, o); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row()) + 1,
                    static_cast<long>(it.col()) + 1, it.value());
      out << buf;
    }
  std::ofstream rout(path + ".rhs");
  rout << "%%MatrixMarket matrix array real general\n";
  rout << sys.rhs.size() << " 1\n";
  for (int i = 0; i < sys.rhs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", sys.rhs[i]);
    rout << buf;
  }
}

}  // namespace plateflow
