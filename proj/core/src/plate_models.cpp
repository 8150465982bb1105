#include "plateflow/plate_models.hpp"

#include <cmath>
#include <random>

#include "plateflow/errors.hpp"

namespace plateflow {

namespace {

double builtin_f(KirchhoffF kind, double scale, double s) {
  switch (kind) {
    case KirchhoffF::Linear: return scale * s;
    case KirchhoffF::Cubic: return scale * s * s * s;
    case KirchhoffF::Sine: return scale * std::sin(s);
  }
  return 0.0;
}

double builtin_phi(KirchhoffF kind, double scale, double s) {
  switch (kind) {
    case KirchhoffF::Linear: return 0.5 * scale * s * s;
    case KirchhoffF::Cubic: return 0.25 * scale * s * s * s * s;
    case KirchhoffF::Sine: return scale * (1.0 - std::cos(s));
  }
  return 0.0;
}

// Lower-bound data for Phi(s) >= -gamma s^2/2 - C_f (per built-in).
void builtin_growth(KirchhoffF kind, double scale, double& gamma, double& C_f) {
  switch (kind) {
    case KirchhoffF::Linear:
      gamma = std::max(-scale, 0.0);
      C_f = 0.0;
      return;
    case KirchhoffF::Cubic:
      gamma = 0.0;
      C_f = 0.0;
      return;
    case KirchhoffF::Sine:
      gamma = 0.0;
      C_f = 2.0 * std::max(-scale, 0.0);
      return;
  }
}

// Gradients of the plate field at the (nx+1)x(ny+1) cell midpoints from the
// four corner nodes; the matching adjoint scatters cell fluxes back so that
// (adjoint(q), psi)_h = hx*hy * sum_cells q . grad_cell(psi) exactly.
struct CellGrad {
  Eigen::VectorXd gx, gy;  // size (nx+1)*(ny+1)
};

CellGrad cell_gradient(const PlateGrid& g, const Eigen::VectorXd& interior) {
  const Eigen::MatrixXd e = extend_with_boundary(g, interior);
  const int cx = g.nx + 1, cy = g.ny + 1;
  CellGrad out;
  out.gx.resize(cx * cy);
  out.gy.resize(cx * cy);
  const double ax = 1.0 / (2.0 * g.hx());
  const double ay = 1.0 / (2.0 * g.hy());
  for (int cj = 0; cj < cy; ++cj)
    for (int ci = 0; ci < cx; ++ci) {
      const int c = ci + cj * cx;
      out.gx[c] = (e(ci + 1, cj) - e(ci, cj) + e(ci + 1, cj + 1) - e(ci, cj + 1)) * ax;
      out.gy[c] = (e(ci, cj + 1) - e(ci, cj) + e(ci + 1, cj + 1) - e(ci + 1, cj)) * ay;
    }
  return out;
}

Eigen::VectorXd cell_divergence_adjoint(const PlateGrid& g, const Eigen::VectorXd& qx,
                                        const Eigen::VectorXd& qy) {
  const int cx = g.nx + 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.interior_count());
  const double ax = 1.0 / (2.0 * g.hx());
  const double ay = 1.0 / (2.0 * g.hy());
  for (int cj = 0; cj <= g.ny; ++cj)
    for (int ci = 0; ci <= g.nx; ++ci) {
      const int c = ci + cj * cx;
      for (int db = 0; db <= 1; ++db)
        for (int da = 0; da <= 1; ++da) {
          const int a = ci + da, b = cj + db;  // extended node indices
          if (a < 1 || a > g.nx || b < 1 || b > g.ny) continue;
          out[g.index(a - 1, b - 1)] +=
              qx[c] * (da ? ax : -ax) + qy[c] * (db ? ay : -ay);
        }
    }
  return out;
}

void check_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string("plate model produced non-finite values in ") + what);
}

Eigen::VectorXd sample_ball(std::mt19937_64& rng, const Eigen::VectorXd& xi, double R) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int k = static_cast<int>(xi.size());
  Eigen::VectorXd z(k);
  for (int i = 0; i < k; ++i) z[i] = gauss(rng);
  double nz = z.norm();
  if (nz == 0.0) nz = 1.0;
  const double radius = R * std::pow(unif(rng), 1.0 / k);
  Eigen::VectorXd c(k);
  for (int i = 0; i < k; ++i) c[i] = radius * z[i] / (nz * std::sqrt(xi[i]));
  return c;
}

}  // namespace

std::string to_string(PlateModelKind kind) {
  switch (kind) {
    case PlateModelKind::Zero: return "zero";
    case PlateModelKind::Kirchhoff: return "kirchhoff";
    case PlateModelKind::VonKarman: return "von_karman";
    case PlateModelKind::Berger: return "berger";
  }
  return "?";
}

Eigen::VectorXd dxx(const PlateGrid& g, const Eigen::VectorXd& f) {
  const Eigen::MatrixXd e = extend_with_boundary(g, f);
  Eigen::VectorXd out(g.interior_count());
  const double c = 1.0 / (g.hx() * g.hx());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out[g.index(i, j)] = (e(i, j + 1) - 2.0 * e(i + 1, j + 1) + e(i + 2, j + 1)) * c;
  return out;
}

Eigen::VectorXd dyy(const PlateGrid& g, const Eigen::VectorXd& f) {
  const Eigen::MatrixXd e = extend_with_boundary(g, f);
  Eigen::VectorXd out(g.interior_count());
  const double c = 1.0 / (g.hy() * g.hy());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out[g.index(i, j)] = (e(i + 1, j) - 2.0 * e(i + 1, j + 1) + e(i + 1, j + 2)) * c;
  return out;
}

Eigen::VectorXd dxy(const PlateGrid& g, const Eigen::VectorXd& f) {
  const Eigen::MatrixXd e = extend_with_boundary(g, f);
  Eigen::VectorXd out(g.interior_count());
  const double c = 1.0 / (4.0 * g.hx() * g.hy());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out[g.index(i, j)] =
          (e(i + 2, j + 2) - e(i + 2, j) - e(i, j + 2) + e(i, j)) * c;
  return out;
}

Eigen::VectorXd vk_bracket(const PlateGrid& grid, const Eigen::VectorXd& w,
                           const Eigen::VectorXd& u) {
  if (w.size() != grid.interior_count() || u.size() != grid.interior_count())
    throw ParameterError("vk_bracket: fields do not match the grid");
  return dxx(grid, w).cwiseProduct(dyy(grid, u)) + dyy(grid, w).cwiseProduct(dxx(grid, u)) -
         2.0 * dxy(grid, w).cwiseProduct(dxy(grid, u));
}

AiryField airy_solve(const GalerkinBasis& basis, const Eigen::VectorXd& eta_field) {
  const PlateGrid& g = basis.grid();
  const Eigen::VectorXd b = vk_bracket(g, eta_field, eta_field);
  const Eigen::VectorXd rhs = -g.quad_weight() * b;
  AiryField out;
  out.v = basis.biharmonic_factorization().solve(rhs);
  if (basis.biharmonic_factorization().info() != Eigen::Success)
    throw SolverError("airy_solve: biharmonic solve failed");
  const double scale = rhs.norm();
  out.residual = scale > 0.0 ? (basis.biharmonic() * out.v - rhs).norm() / scale : 0.0;
  return out;
}

PlateModel PlateModel::make(const GalerkinBasis& basis, const PlateModelConfig& cfg) {
  PlateModel m;
  m.kind_ = cfg.kind;
  m.grid_ = basis.grid();
  m.kirchhoff_ = cfg.kirchhoff;
  m.von_karman_ = cfg.von_karman;
  m.berger_ = cfg.berger;

  const PlateGrid& g = m.grid_;
  const double lam1 = g.dirichlet_lambda1();
  const double area = g.Lx * g.Ly;
  ModelConstants& c = m.constants_;
  c.lambda1 = lam1;

  auto field_norm_sq = [&](const Eigen::VectorXd& f) {
    return f.size() == 0 ? 0.0 : g.quad_weight() * f.squaredNorm();
  };
  auto check_field = [&](const Eigen::VectorXd& f, const char* name) {
    if (f.size() != 0 && f.size() != g.interior_count())
      throw ParameterError(std::string("plate model field '") + name + "' does not match the grid");
  };

  switch (cfg.kind) {
    case PlateModelKind::Zero: {
      c.kappa = 0.25;
      c.C_star = 0.0;
      c.a = 0.0;
      c.eps = 1.0;
      break;
    }
    case PlateModelKind::Kirchhoff: {
      const auto& p = m.kirchhoff_;
      check_field(p.h, "h");
      if (p.nu < 0.0) throw ParameterError("kirchhoff: nu >= 0 required");
      if (!(p.q > p.r) || p.r < 0.0) throw ParameterError("kirchhoff: q > r >= 0 required");
      // Sampled slope test for liminf f(s)/s > -lambda1^2.
      for (double s : {-1e6, -1e4, -1e2, 1e2, 1e4, 1e6}) {
        const double slope = builtin_f(p.f, p.f_scale, s) / s;
        if (!(slope > -lam1 * lam1 * (1.0 - 1e-9)))
          throw ParameterError("kirchhoff: built-in f violates the growth condition at s=" +
                               std::to_string(s));
      }
      double gamma = 0.0, C_f = 0.0;
      builtin_growth(p.f, p.f_scale, gamma, C_f);
      const bool has_h = p.h.size() != 0 && p.h.norm() > 0.0;
      double gamma_prime = 0.0;
      if (p.gamma_prime) {
        gamma_prime = *p.gamma_prime;
        if (!(gamma_prime < lam1 * lam1) || gamma_prime < gamma)
          throw ParameterError("kirchhoff: gamma_prime must satisfy gamma <= gamma' < lambda1^2");
        if (has_h && !(gamma_prime > gamma))
          throw ParameterError("kirchhoff: gamma_prime must exceed gamma when h is nonzero");
      } else {
        gamma_prime = (has_h || gamma > 0.0) ? gamma + 0.5 * (lam1 * lam1 - gamma) : 0.0;
      }
      double C_m = 0.0;
      if (p.nu > 0.0 && p.mu > 0.0) {
        const double tstar = std::pow(p.mu, 1.0 / (p.q - p.r));
        const double val = p.nu / (p.q + 2.0) * std::pow(tstar, p.q + 2.0) -
                           p.nu * p.mu / (p.r + 2.0) * std::pow(tstar, p.r + 2.0);
        C_m = std::max(0.0, -val);
      }
      c.kappa = std::max(0.25, gamma_prime / (2.0 * lam1 * lam1));
      c.C_star = (C_f + C_m) * area;
      if (has_h) c.C_star += field_norm_sq(p.h) / (2.0 * (gamma_prime - gamma));
      c.a = 0.5;
      break;
    }
    case PlateModelKind::VonKarman: {
      check_field(m.von_karman_.F0, "F0");
      check_field(m.von_karman_.h, "h");
      const bool has_F0 = m.von_karman_.F0.size() != 0 && m.von_karman_.F0.norm() > 0.0;
      const bool has_h = m.von_karman_.h.size() != 0 && m.von_karman_.h.norm() > 0.0;
      c.kappa = 0.25;
      c.a = 0.0;
      c.eps = 1.0;
      if (!has_F0) {
        c.C_star = has_h ? field_norm_sq(m.von_karman_.h) / (4.0 * c.kappa * lam1 * lam1) : 0.0;
      } else {
        c.C_star_empirical = true;  // sampled below once kappa is final
      }
      break;
    }
    case PlateModelKind::Berger: {
      const auto& p = m.berger_;
      check_field(p.h, "h");
      if (!(p.nu > 0.0)) throw ParameterError("berger: nu > 0 required");
      c.kappa = 0.25;
      c.a = 0.0;
      c.eps = 1.0;
      c.C_star = std::max(p.G, 0.0) * std::max(p.G, 0.0) / (4.0 * p.nu);
      if (p.h.size() != 0 && p.h.norm() > 0.0)
        c.C_star += field_norm_sq(p.h) / (4.0 * c.kappa * lam1 * lam1);
      break;
    }
  }

  if (cfg.kind == PlateModelKind::Kirchhoff)
    c.eps = 0.5 * c.a;
  if (cfg.a) c.a = *cfg.a;
  if (cfg.eps) c.eps = *cfg.eps;
  if (cfg.kappa) c.kappa = *cfg.kappa;
  if (!(c.kappa > 0.0 && c.kappa < 0.5))
    throw ParameterError("plate model: kappa must lie strictly inside (0, 1/2)");
  if (!(c.a >= 0.0 && c.a < 2.0)) throw ParameterError("plate model: a must lie in [0, 2)");
  if (!(c.eps > 0.0 && c.eps <= 2.0)) throw ParameterError("plate model: eps must lie in (0, 2]");

  if (cfg.C_star) {
    c.C_star = *cfg.C_star;
    c.C_star_empirical = false;
  } else if (c.C_star_empirical) {
    // No analytic constant for von Karman with a nonzero F0 datum: sample the
    // coercivity defect over a wide ball and pad it.
    std::mt19937_64 rng(cfg.seed);
    double worst = 0.0;
    for (int s = 0; s < 2000; ++s) {
      const Eigen::VectorXd eta = sample_ball(rng, basis.eigenvalues(), 10.0);
      const double quad = c.kappa * basis.spectral_sobolev_norm(eta, 2.0) *
                          basis.spectral_sobolev_norm(eta, 2.0);
      const double val = quad + m.potential(basis, eta);
      worst = std::min(worst, val);
    }
    c.C_star = 1.5 * std::max(0.0, -worst);
  }
  if (c.C_star < 0.0) throw ParameterError("plate model: C_star must be nonnegative");
  return m;
}

Eigen::VectorXd PlateModel::force_field(const GalerkinBasis& basis,
                                        const Eigen::VectorXd& eta_coeffs) const {
  const PlateGrid& g = grid_;
  const Eigen::VectorXd e = basis.nodal(eta_coeffs);
  switch (kind_) {
    case PlateModelKind::Zero:
      return Eigen::VectorXd::Zero(g.interior_count());
    case PlateModelKind::Kirchhoff: {
      const auto& p = kirchhoff_;
      Eigen::VectorXd out = Eigen::VectorXd::Zero(g.interior_count());
      if (p.nu > 0.0) {
        const CellGrad cg = cell_gradient(g, e);
        const int nc = static_cast<int>(cg.gx.size());
        Eigen::VectorXd qx(nc), qy(nc);
        for (int cidx = 0; cidx < nc; ++cidx) {
          const double t = std::hypot(cg.gx[cidx], cg.gy[cidx]);
          const double w = p.nu * (std::pow(t, p.q) - p.mu * std::pow(t, p.r));
          qx[cidx] = w * cg.gx[cidx];
          qy[cidx] = w * cg.gy[cidx];
        }
        out = cell_divergence_adjoint(g, qx, qy);
        check_finite(out, "the Kirchhoff divergence term");
      }
      for (int i = 0; i < e.size(); ++i) out[i] += builtin_f(p.f, p.f_scale, e[i]);
      if (p.h.size()) out -= p.h;
      check_finite(out, "the Kirchhoff force");
      return out;
    }
    case PlateModelKind::VonKarman: {
      const auto& p = von_karman_;
      const AiryField airy = airy_solve(basis, e);
      const Eigen::VectorXd exx = dxx(g, e), eyy = dyy(g, e), exy = dxy(g, e);
      // Divergence-form bracket: the exact gradient of (1/4) v^T B v.
      Eigen::VectorXd out = -(dyy(g, airy.v.cwiseProduct(exx)) + dxx(g, airy.v.cwiseProduct(eyy)) -
                              2.0 * dxy(g, airy.v.cwiseProduct(exy)));
      check_finite(out, "the von Karman Airy term");
      if (p.F0.size() && p.F0.norm() > 0.0) {
        const Eigen::VectorXd fxx = dxx(g, p.F0), fyy = dyy(g, p.F0), fxy = dxy(g, p.F0);
        const Eigen::VectorXd pointwise =
            exx.cwiseProduct(fyy) + eyy.cwiseProduct(fxx) - 2.0 * exy.cwiseProduct(fxy);
        const Eigen::VectorXd divform = dxx(g, e.cwiseProduct(fyy)) + dyy(g, e.cwiseProduct(fxx)) -
                                        2.0 * dxy(g, e.cwiseProduct(fxy));
        out -= 0.5 * (pointwise + divform);
        check_finite(out, "the von Karman F0 term");
      }
      if (p.h.size()) out -= p.h;
      return out;
    }
    case PlateModelKind::Berger: {
      const auto& p = berger_;
      const CellGrad cg = cell_gradient(g, e);
      const double Q = g.quad_weight() * (cg.gx.squaredNorm() + cg.gy.squaredNorm());
      Eigen::VectorXd out = (p.nu * Q - p.G) * cell_divergence_adjoint(g, cg.gx, cg.gy);
      if (p.h.size()) out -= p.h;
      check_finite(out, "the Berger force");
      return out;
    }
  }
  return Eigen::VectorXd::Zero(g.interior_count());
}

Eigen::VectorXd PlateModel::force(const GalerkinBasis& basis,
                                  const Eigen::VectorXd& eta_coeffs) const {
  if (kind_ == PlateModelKind::Zero) return Eigen::VectorXd::Zero(basis.size());
  return basis.project(force_field(basis, eta_coeffs));
}

double PlateModel::potential(const GalerkinBasis& basis, const Eigen::VectorXd& eta_coeffs) const {
  const PlateGrid& g = grid_;
  switch (kind_) {
    case PlateModelKind::Zero:
      return 0.0;
    case PlateModelKind::Kirchhoff: {
      const auto& p = kirchhoff_;
      const Eigen::VectorXd e = basis.nodal(eta_coeffs);
      double acc = 0.0;
      for (int i = 0; i < e.size(); ++i) acc += builtin_phi(p.f, p.f_scale, e[i]);
      if (p.nu > 0.0) {
        const CellGrad cg = cell_gradient(g, e);
        for (int cidx = 0; cidx < cg.gx.size(); ++cidx) {
          const double t = std::hypot(cg.gx[cidx], cg.gy[cidx]);
          acc += p.nu / (p.q + 2.0) * std::pow(t, p.q + 2.0) -
                 p.nu * p.mu / (p.r + 2.0) * std::pow(t, p.r + 2.0);
        }
      }
      if (p.h.size()) acc -= e.dot(p.h);
      const double val = g.quad_weight() * acc;
      if (!std::isfinite(val)) throw NumericError("Kirchhoff potential is non-finite");
      return val;
    }
    case PlateModelKind::VonKarman: {
      const auto& p = von_karman_;
      const Eigen::VectorXd e = basis.nodal(eta_coeffs);
      const AiryField airy = airy_solve(basis, e);
      double val = 0.25 * airy.v.dot(basis.biharmonic() * airy.v);
      if (p.F0.size() && p.F0.norm() > 0.0)
        val -= 0.5 * g.quad_weight() * vk_bracket(g, e, p.F0).dot(e);
      if (p.h.size()) val -= g.quad_weight() * e.dot(p.h);
      if (!std::isfinite(val)) throw NumericError("von Karman potential is non-finite");
      return val;
    }
    case PlateModelKind::Berger: {
      const auto& p = berger_;
      const Eigen::VectorXd e = basis.nodal(eta_coeffs);
      const CellGrad cg = cell_gradient(g, e);
      const double Q = g.quad_weight() * (cg.gx.squaredNorm() + cg.gy.squaredNorm());
      double val = 0.25 * p.nu * Q * Q - 0.5 * p.G * Q;
      if (p.h.size()) val -= g.quad_weight() * e.dot(p.h);
      if (!std::isfinite(val)) throw NumericError("Berger potential is non-finite");
      return val;
    }
  }
  return 0.0;
}

LipschitzEstimate estimate_lipschitz(const PlateModel& model, const GalerkinBasis& basis, double R,
                                     double a, int n_samples, unsigned long long seed) {
  if (n_samples < 100) throw ParameterError("estimate_lipschitz: n_samples >= 100 required");
  std::mt19937_64 rng(seed);
  LipschitzEstimate est;
  est.R = R;
  est.a = a;
  est.n_samples = n_samples;
  est.seed = seed;
  int used = 0;
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd e1 = sample_ball(rng, basis.eigenvalues(), R);
    const Eigen::VectorXd e2 = sample_ball(rng, basis.eigenvalues(), R);
    const double dist = basis.spectral_sobolev_norm(e1 - e2, 2.0);
    if (dist < 1e-12 * std::max(R, 1.0)) continue;
    const Eigen::VectorXd df = model.force(basis, e1) - model.force(basis, e2);
    est.max_ratio = std::max(est.max_ratio, basis.spectral_sobolev_norm(df, -a) / dist);
    ++used;
  }
  if (used == 0) throw ParameterError("estimate_lipschitz: all sampled pairs degenerate");
  est.C_R = 2.0 * est.max_ratio;
  return est;
}

CoercivityReport check_coercivity(const PlateModel& model, const GalerkinBasis& basis, double R,
                                  int n_samples, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  CoercivityReport rep;
  rep.R = R;
  rep.n_samples = n_samples;
  rep.seed = seed;
  const auto& c = model.constants();
  double min_margin = std::numeric_limits<double>::infinity();
  auto eval = [&](const Eigen::VectorXd& eta) {
    const double elastic = basis.spectral_sobolev_norm(eta, 2.0);
    const double margin = c.kappa * elastic * elastic + model.potential(basis, eta) + c.C_star;
    min_margin = std::min(min_margin, margin);
  };
  eval(Eigen::VectorXd::Zero(basis.size()));
  for (int i = 0; i < basis.size(); ++i) {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(basis.size());
    eta[i] = R / std::sqrt(basis.xi(i));
    eval(eta);
    eval(-eta);
  }
  for (int s = 0; s < n_samples; ++s) eval(sample_ball(rng, basis.eigenvalues(), R));
  rep.min_margin = min_margin;
  rep.pass = min_margin >= -1e-12;
  return rep;
}

double sample_potential_bound(const PlateModel& model, const GalerkinBasis& basis,
                              const Eigen::VectorXd& eta0_coeffs, int n_samples,
                              unsigned long long seed) {
  Eigen::VectorXd eta0 = Eigen::VectorXd::Zero(basis.size());
  eta0.head(eta0_coeffs.size()) = eta0_coeffs;
  const double R = basis.spectral_sobolev_norm(eta0, 2.0);
  std::mt19937_64 rng(seed);
  double best = model.potential(basis, eta0);
  for (int s = 0; s < n_samples; ++s)
    best = std::max(best, model.potential(basis, sample_ball(rng, basis.eigenvalues(), R)));
  return best + 0.1 * std::abs(best);
}

}  // namespace plateflow
