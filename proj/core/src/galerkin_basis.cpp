#include "plateflow/galerkin_basis.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "plateflow/errors.hpp"

namespace plateflow {

namespace {

// 5-point Laplacian evaluated on interior plus boundary nodes. Boundary rows
// use the ghost reflection w(-1) = w(+1), which together with w = 0 on the
// ring encodes the clamped pair w = dw/dnu = 0 at second order.
SpMat extended_laplacian(const PlateGrid& g) {
  const double ax = 1.0 / (g.hx() * g.hx());
  const double ay = 1.0 / (g.hy() * g.hy());
  const int ex = g.nx + 2;
  auto erow = [&](int i, int j) { return i + j * ex; };

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(5 * g.interior_count() + 2 * (g.nx + g.ny) * 2);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int col = g.index(i, j);
      const int r = erow(i + 1, j + 1);
      trips.emplace_back(r, col, -2.0 * (ax + ay));
      if (i > 0) trips.emplace_back(r, g.index(i - 1, j), ax);
      if (i < g.nx - 1) trips.emplace_back(r, g.index(i + 1, j), ax);
      if (j > 0) trips.emplace_back(r, g.index(i, j - 1), ay);
      if (j < g.ny - 1) trips.emplace_back(r, g.index(i, j + 1), ay);
    }
  }
  for (int j = 0; j < g.ny; ++j) {
    trips.emplace_back(erow(0, j + 1), g.index(0, j), 2.0 * ax);
    trips.emplace_back(erow(g.nx + 1, j + 1), g.index(g.nx - 1, j), 2.0 * ax);
  }
  for (int i = 0; i < g.nx; ++i) {
    trips.emplace_back(erow(i + 1, 0), g.index(i, 0), 2.0 * ay);
    trips.emplace_back(erow(i + 1, g.ny + 1), g.index(i, g.ny - 1), 2.0 * ay);
  }

  SpMat D(ex * (g.ny + 2), g.interior_count());
  D.setFromTriplets(trips.begin(), trips.end());
  return D;
}

Eigen::VectorXd extended_weights(const PlateGrid& g) {
  const int ex = g.nx + 2;
  const int ey = g.ny + 2;
  Eigen::VectorXd w(ex * ey);
  for (int j = 0; j < ey; ++j) {
    const double cy = (j == 0 || j == ey - 1) ? 0.5 : 1.0;
    for (int i = 0; i < ex; ++i) {
      const double cx = (i == 0 || i == ex - 1) ? 0.5 : 1.0;
      w[i + j * ex] = g.quad_weight() * cx * cy;
    }
  }
  return w;
}

void normalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  int imax = 0;
  double amax = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > amax) {
      amax = std::abs(v[i]);
      imax = i;
    }
  }
  if (v[imax] < 0.0) v = -v;
}

constexpr int kDenseEigLimit = 4096;
constexpr int kCacheFormatVersion = 1;

}  // namespace

SpMat assemble_clamped_biharmonic(const PlateGrid& grid) {
  SpMat D = extended_laplacian(grid);
  Eigen::VectorXd w = extended_weights(grid);
  SpMat B = D.transpose() * w.asDiagonal() * D;
  B.makeCompressed();
  return B;
}

void clamped_gradient(const PlateGrid& g, const Eigen::VectorXd& interior, Eigen::VectorXd& dx,
                      Eigen::VectorXd& dy) {
  const Eigen::MatrixXd e = extend_with_boundary(g, interior);
  dx.resize(g.interior_count());
  dy.resize(g.interior_count());
  const double cx = 1.0 / (2.0 * g.hx());
  const double cy = 1.0 / (2.0 * g.hy());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      dx[g.index(i, j)] = (e(i + 2, j + 1) - e(i, j + 1)) * cx;
      dy[g.index(i, j)] = (e(i + 1, j + 2) - e(i + 1, j)) * cy;
    }
}

GalerkinBasis GalerkinBasis::build(const PlateGrid& grid, int k_max) {
  grid.validate();
  const int n = grid.interior_count();
  if (k_max < 1 || k_max > n)
    throw ParameterError("GalerkinBasis: k_max must satisfy 1 <= k_max <= nx*ny (got " +
                         std::to_string(k_max) + ", grid holds " + std::to_string(n) + ")");

  GalerkinBasis basis;
  basis.grid_ = grid;
  basis.B_ = assemble_clamped_biharmonic(grid);

  const double mq = grid.quad_weight();
  if (n <= kDenseEigLimit) {
    Eigen::MatrixXd Bd = Eigen::MatrixXd(basis.B_) / mq;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Bd);
    if (es.info() != Eigen::Success)
      throw SolverError("GalerkinBasis: dense eigensolver failed to converge");
    basis.xi_ = es.eigenvalues().head(k_max);
    basis.modes_ = es.eigenvectors().leftCols(k_max) / std::sqrt(mq);
  } else {
    // Deterministic block inverse iteration with Rayleigh-Ritz projection;
    // B is positive definite so the shift sits at zero.
    const int m = std::min(n, k_max + std::max(8, k_max / 2));
    std::mt19937_64 rng(0x5eedbead1234abcdULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd X(n, m);
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < n; ++r) X(r, c) = gauss(rng);

    Eigen::SimplicialLDLT<SpMat> solver(basis.B_);
    if (solver.info() != Eigen::Success)
      throw SolverError("GalerkinBasis: factorization of the biharmonic operator failed");

    Eigen::VectorXd prev = Eigen::VectorXd::Constant(k_max, -1.0);
    bool converged = false;
    Eigen::VectorXd vals;
    Eigen::MatrixXd vecs;
    for (int it = 0; it < 200 && !converged; ++it) {
      Eigen::MatrixXd Y = solver.solve(X * mq);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
      Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
      Eigen::MatrixXd Bp = Q.transpose() * (basis.B_ * Q) / mq;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (Bp + Bp.transpose()));
      vals = small.eigenvalues().head(k_max);
      vecs = Q * small.eigenvectors();
      X = vecs;
      const double drift = (vals - prev).cwiseAbs().maxCoeff() /
                           std::max(1.0, vals.cwiseAbs().maxCoeff());
      prev = vals;
      converged = drift < 1e-13;
    }
    basis.xi_ = vals;
    basis.modes_ = vecs.leftCols(k_max) / std::sqrt(mq);
    for (int i = 0; i < k_max; ++i) {
      const Eigen::VectorXd r =
          basis.B_ * basis.modes_.col(i) - mq * basis.xi_[i] * basis.modes_.col(i);
      const double rel = r.norm() / std::max(1.0, mq * basis.xi_[i]);
      if (!converged || rel > 1e-8)
        throw SolverError("GalerkinBasis: shift-invert iteration did not converge for eigenpair " +
                          std::to_string(i) + " (residual " + std::to_string(rel) + ")");
    }
  }

  // Snap eigenvalues onto the Rayleigh quotient of the returned vectors so the
  // identity xi = ||Lap_h w||^2 / ||w||^2 holds to rounding, then fix signs.
  for (int i = 0; i < k_max; ++i) {
    const Eigen::VectorXd& w = basis.modes_.col(i);
    basis.xi_[i] = w.dot(basis.B_ * w) / (mq * w.squaredNorm());
    normalize_sign(basis.modes_.col(i));
  }
  for (int i = 0; i + 1 < k_max; ++i)
    if (basis.xi_[i] > basis.xi_[i + 1]) std::swap(basis.xi_[i], basis.xi_[i + 1]);
  if (!(basis.xi_[0] > 0.0)) throw SolverError("GalerkinBasis: first eigenvalue not positive");
  if (k_max > 1 && !(basis.xi_[1] - basis.xi_[0] > 1e-10 * basis.xi_[0]))
    throw SolverError("GalerkinBasis: first eigenvalue unexpectedly degenerate");

  basis.finalize();
  return basis;
}

void GalerkinBasis::finalize() {
  if (B_.rows() == 0) B_ = assemble_clamped_biharmonic(grid_);
  B_ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  B_ldlt_->compute(B_);
  if (B_ldlt_->info() != Eigen::Success)
    throw SolverError("GalerkinBasis: biharmonic factorization failed");

  const int k = size();
  modes_dx_.resize(grid_.interior_count(), k);
  modes_dy_.resize(grid_.interior_count(), k);
  Eigen::VectorXd dx, dy;
  for (int i = 0; i < k; ++i) {
    clamped_gradient(grid_, modes_.col(i), dx, dy);
    modes_dx_.col(i) = dx;
    modes_dy_.col(i) = dy;
  }
}

Eigen::VectorXd GalerkinBasis::project(const Eigen::VectorXd& f) const {
  if (f.size() != grid_.interior_count())
    throw ParameterError("GalerkinBasis::project: field size mismatch");
  return grid_.quad_weight() * (modes_.transpose() * f);
}

Eigen::VectorXd GalerkinBasis::nodal(const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() > size()) throw ParameterError("GalerkinBasis::nodal: too many coefficients");
  return modes_.leftCols(coeffs.size()) * coeffs;
}

double GalerkinBasis::spectral_sobolev_norm(const Eigen::VectorXd& coeffs, double s) const {
  if (s < -2.0 || s > 2.0)
    throw ParameterError("spectral_sobolev_norm: order s must lie in [-2,2], got " +
                         std::to_string(s));
  if (coeffs.size() > size())
    throw ParameterError("spectral_sobolev_norm: coefficient vector longer than basis");
  double acc = 0.0;
  for (int i = 0; i < coeffs.size(); ++i) acc += std::pow(xi_[i], 0.5 * s) * coeffs[i] * coeffs[i];
  return std::sqrt(acc);
}

void GalerkinBasis::save_cache(const std::string& path) const {
  nlohmann::json j;
  j["format_version"] = kCacheFormatVersion;
  j["grid"] = {{"Lx", grid_.Lx}, {"Ly", grid_.Ly}, {"nx", grid_.nx}, {"ny", grid_.ny}};
  j["k_max"] = size();
  j["xi"] = std::vector<double>(xi_.data(), xi_.data() + xi_.size());
  std::vector<std::vector<double>> cols;
  for (int c = 0; c < size(); ++c)
    cols.emplace_back(modes_.col(c).data(), modes_.col(c).data() + modes_.rows());
  j["modes"] = cols;
  std::ofstream out(path);
  if (!out) throw Error("GalerkinBasis: cannot write cache file " + path);
  out << j.dump();
}

std::optional<GalerkinBasis> GalerkinBasis::load_cache(const std::string& path,
                                                       const PlateGrid& grid, int k_max) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kCacheFormatVersion)
    return std::nullopt;
  PlateGrid cached{j["grid"]["Lx"].get<double>(), j["grid"]["Ly"].get<double>(),
                   j["grid"]["nx"].get<int>(), j["grid"]["ny"].get<int>()};
  if (!(cached == grid) || j["k_max"].get<int>() < k_max) return std::nullopt;

  GalerkinBasis basis;
  basis.grid_ = grid;
  const auto xi = j["xi"].get<std::vector<double>>();
  basis.xi_ = Eigen::Map<const Eigen::VectorXd>(xi.data(), k_max);
  basis.modes_.resize(grid.interior_count(), k_max);
  const auto cols = j["modes"].get<std::vector<std::vector<double>>>();
  for (int c = 0; c < k_max; ++c) {
    if (static_cast<int>(cols[c].size()) != grid.interior_count()) return std::nullopt;
    basis.modes_.col(c) = Eigen::Map<const Eigen::VectorXd>(cols[c].data(), grid.interior_count());
  }
  basis.finalize();
  return basis;
}

}  // namespace plateflow
