#include "plateflow/splitting_driver.hpp"

#include <cmath>
#include <filesystem>

#include "plateflow/errors.hpp"

namespace plateflow {

namespace {

// 8-point Gauss-Legendre rule on [0,1].
constexpr int kGauss = 8;
constexpr double kGaussX[kGauss] = {
    0.019855071751231884, 0.101666761293186630, 0.237233795041835507, 0.408282678752175098,
    0.591717321247824902, 0.762766204958164493, 0.898333238706813370, 0.980144928248768116};
constexpr double kGaussW[kGauss] = {
    0.050614268145188130, 0.111190517226687235, 0.156853322938943644, 0.181341891689180991,
    0.181341891689180991, 0.156853322938943644, 0.111190517226687235, 0.050614268145188130};

// Dormand-Prince 5(4) with step-size control; integrates y' = f(t,y) from t to
// t_target, clipping steps to land on t_target exactly.
template <class F>
void dopri5_advance(F&& f, double& t, Eigen::VectorXd& y, double t_target, double tol,
                    const std::string& what) {
  if (t_target <= t) return;
  double h = (t_target - t) / 8.0;
  const int n = static_cast<int>(y.size());
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y5(n), y4(n);
  int rejects_in_a_row = 0;
  while (t < t_target) {
    h = std::min(h, t_target - t);
    k1 = f(t, y);
    ytmp = y + h * (0.2 * k1);
    k2 = f(t + 0.2 * h, ytmp);
    ytmp = y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2);
    k3 = f(t + 0.3 * h, ytmp);
    ytmp = y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3);
    k4 = f(t + 0.8 * h, ytmp);
    ytmp = y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3 -
                    212.0 / 729.0 * k4);
    k5 = f(t + 8.0 / 9.0 * h, ytmp);
    ytmp = y + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 +
                    49.0 / 176.0 * k4 - 5103.0 / 18656.0 * k5);
    k6 = f(t + h, ytmp);
    y5 = y + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 -
                  2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
    k7 = f(t + h, y5);
    y4 = y + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4 -
                  92097.0 / 339200.0 * k5 + 187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7);
    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      const double sc = tol + tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err = std::max(err, std::abs(y5[i] - y4[i]) / sc);
    }
    if (err <= 1.0) {
      t += h;
      y = y5;
      rejects_in_a_row = 0;
    } else if (++rejects_in_a_row > 60) {
      throw StepError("ODE integrator failed to reach tolerance in " + what +
                      "; try a smaller time step or fewer modes");
    }
    const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::min(5.0, std::max(0.2, fac));
    if (!(h > 0.0) || !y.allFinite())
      throw StepError("ODE integrator produced non-finite state in " + what);
  }
}

}  // namespace

double n_min_value(double T, double alpha, double a, const Eigen::VectorXd& xi,
                   const SplittingConstants& c, double C_Gamma) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw ParameterError("n_min_value: alpha must lie in (0,2), got " + std::to_string(alpha));
  const int k = static_cast<int>(xi.size());
  double sum_xi_a2 = 0.0;
  for (int i = 0; i < k; ++i) sum_xi_a2 += std::pow(xi[i], 0.5 * a);
  const double CB = C_Gamma * c.C_B;  // C_B carries C_Gamma = 1; scale for sensitivity reports
  const double base =
      2.0 * xi[k - 1] * CB + 4.0 * c.C_R * c.C_R * C_Gamma * (c.F0_norm * c.F0_norm + CB) * sum_xi_a2;
  return T * std::pow(base, 1.0 / (2.0 - alpha));
}

long compute_N_min(double T, double alpha, double a, const Eigen::VectorXd& xi,
                   const SplittingConstants& constants) {
  return static_cast<long>(std::ceil(n_min_value(T, alpha, a, xi, constants)));
}

Eigen::VectorXd average_rate(const Eigen::VectorXd& alpha_start, const Eigen::VectorXd& alpha_end,
                             double dt) {
  return (alpha_end - alpha_start) / dt;
}

SspResult ssp_step(const GalerkinBasis& basis, const PlateModel& model,
                   const Eigen::VectorXd& alpha_start, const Eigen::VectorXd& v_n, double dt,
                   double tol_ode, long step_index) {
  const int k = basis.size();
  if (alpha_start.size() != k || v_n.size() != k)
    throw ParameterError("ssp_step: coefficient vectors must have length k");
  const Eigen::VectorXd xi = basis.eigenvalues();
  const std::string what = step_index >= 0 ? "SSP step " + std::to_string(step_index) : "SSP";

  auto rhs = [&](double, const Eigen::VectorXd& a) -> Eigen::VectorXd {
    return v_n - dt * (xi.cwiseProduct(a) + model.force(basis, a));
  };

  SspResult res;
  res.alpha_nodes.resize(k, kGauss);
  res.dalpha_nodes.resize(k, kGauss);

  Eigen::VectorXd y = alpha_start;
  double s = 0.0;
  for (int gq = 0; gq < kGauss; ++gq) {
    dopri5_advance(rhs, s, y, kGaussX[gq] * dt, tol_ode, what);
    res.alpha_nodes.col(gq) = y;
    res.dalpha_nodes.col(gq) = rhs(s, y);
  }
  dopri5_advance(rhs, s, y, dt, tol_ode, what);
  res.alpha_end = y;
  res.dalpha_end = rhs(s, y);

  const Eigen::VectorXd dalpha_start = rhs(0.0, alpha_start);
  const Eigen::VectorXd avg = average_rate(alpha_start, res.alpha_end, dt);
  res.max_mismatch_norm = std::max((dalpha_start - v_n).norm(), (res.dalpha_end - v_n).norm());
  res.max_avg_dev_sq =
      std::max((avg - dalpha_start).squaredNorm(), (avg - res.dalpha_end).squaredNorm());
  for (int gq = 0; gq < kGauss; ++gq) {
    const Eigen::VectorXd da = res.dalpha_nodes.col(gq);
    res.mismatch_sq_integral += kGaussW[gq] * dt * (da - v_n).squaredNorm();
    res.dteta_sq_integral += kGaussW[gq] * dt * da.squaredNorm();
    res.max_mismatch_norm = std::max(res.max_mismatch_norm, (da - v_n).norm());
    res.max_avg_dev_sq = std::max(res.max_avg_dev_sq, (avg - da).squaredNorm());
  }

  // Lemma 3.1 identity at the sub-interval end; the fluid kinetic term appears
  // on both sides and cancels, so only plate quantities enter here.
  const double S_end = 0.5 / dt * res.dteta_sq_integral +
                       0.5 * res.alpha_end.dot(xi.cwiseProduct(res.alpha_end)) +
                       model.potential(basis, res.alpha_end);
  const double F_start = 0.5 * v_n.squaredNorm() +
                         0.5 * alpha_start.dot(xi.cwiseProduct(alpha_start)) +
                         model.potential(basis, alpha_start);
  const double lhs = 0.5 / dt * res.mismatch_sq_integral + S_end;
  res.lem11_residual = std::abs(lhs - F_start) / std::max(1.0, std::abs(F_start));
  return res;
}

std::string to_string(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::completed: return "completed";
    case RunOutcome::touched_bottom: return "touched_bottom";
    case RunOutcome::error: return "error";
  }
  return "?";
}

Simulation::Simulation(const SimConfig& config) : config_(config) {
  config_.validate();
  grid_ = ReferenceGrid{config_.plate_grid(), config_.geometry.nz};
  grid_.validate();

  const PlateGrid pg = config_.plate_grid();
  if (!config_.output.basis_cache.empty()) {
    auto cached = GalerkinBasis::load_cache(config_.output.basis_cache, pg, config_.run.k);
    if (cached) {
      basis_ = std::make_shared<GalerkinBasis>(std::move(*cached));
    } else {
      basis_ = std::make_shared<GalerkinBasis>(GalerkinBasis::build(pg, config_.run.k));
      basis_->save_cache(config_.output.basis_cache);
    }
  } else {
    basis_ = std::make_shared<GalerkinBasis>(GalerkinBasis::build(pg, config_.run.k));
  }

  model_ = std::make_shared<PlateModel>(PlateModel::make(*basis_, config_.model_config(*basis_)));
  fsp_ = std::make_shared<FluidSubproblem>(grid_, *basis_);

  SplittingConstants& c = plan_.constants;
  c.kappa = model_->constants().kappa;
  c.C_star = model_->constants().C_star;
  c.c = 0.5 - c.kappa;

  const Eigen::VectorXd alpha0 = initial_eta();
  const Eigen::VectorXd v0 = initial_v();
  const Eigen::VectorXd u0 = initial_u_faces();
  const Eigen::VectorXd Mw0 = fsp_->jacobian_face_weights(alpha0);
  const Eigen::VectorXd xi = basis_->eigenvalues();
  c.E0 = 0.5 * (FluidSubproblem::weighted_kinetic(u0, Mw0) + alpha0.dot(xi.cwiseProduct(alpha0)) +
                v0.squaredNorm());
  c.C_Pi_eta0 = sample_potential_bound(*model_, *basis_, alpha0, 1000, config_.run.seed + 1);
  c.C0 = c.E0 + c.C_Pi_eta0;
  c.C_B = (c.C_star + c.C0) / c.c;

  const double R = config_.lipschitz.R.value_or(std::max(std::sqrt(std::max(c.C_B, 0.0)), 1e-6));
  lipschitz_ = estimate_lipschitz(*model_, *basis_, R, model_->constants().a,
                                  config_.lipschitz.n_samples, config_.run.seed + 2);
  c.C_R = lipschitz_.C_R;
  c.F0_norm = basis_->spectral_sobolev_norm(
      model_->force(*basis_, Eigen::VectorXd::Zero(basis_->size())), -model_->constants().a);

  plan_.T = config_.run.T;
  plan_.k = config_.run.k;
  plan_.alpha = config_.run.alpha;
  plan_.a = model_->constants().a;
  plan_.strict = config_.run.strict;
  plan_.N_user = config_.run.N_user;
  plan_.N_min = compute_N_min(plan_.T, plan_.alpha, plan_.a, xi, c);
  plan_.N = plan_.strict ? std::max(plan_.N_user, plan_.N_min) : plan_.N_user;
  if (plan_.N < 1) plan_.N = 1;
}

Eigen::VectorXd Simulation::initial_eta() const {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(config_.run.k);
  a.head(config_.run.eta0_coeffs.size()) = config_.run.eta0_coeffs;
  return a;
}

Eigen::VectorXd Simulation::initial_v() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(config_.run.k);
  v.head(config_.run.v0_coeffs.size()) = config_.run.v0_coeffs;
  return v;
}

Eigen::VectorXd Simulation::initial_u_faces() const {
  if (config_.run.u0_lift) return fsp_->lift_boundary(initial_v()).faces;
  return Eigen::VectorXd::Zero(grid_.n_faces());
}

RunResult Simulation::run(const RunOptions& options) const {
  RunResult result;
  result.plan = plan_;
  EnergyLedger& ledger = result.ledger;
  ledger.C0 = plan_.constants.C0;

  const Eigen::VectorXd xi = basis_->eigenvalues();
  const double dt = plan_.dt();
  const double mu = config_.physics.mu;
  const double j_floor = config_.run.j_floor;

  Eigen::VectorXd alpha = initial_eta();
  Eigen::VectorXd v = initial_v();
  Eigen::VectorXd u = initial_u_faces();

  ledger.F0_initial = 0.5 * v.squaredNorm() + 0.5 * alpha.dot(xi.cwiseProduct(alpha)) +
                      model_->potential(*basis_, alpha) +
                      0.5 * FluidSubproblem::weighted_kinetic(u, fsp_->jacobian_face_weights(alpha));

  result.eta_coeffs.push_back(alpha);
  result.v_coeffs.push_back(v);
  if (options.keep_velocity) result.u_faces.push_back(u);

  auto jacobian_range = [&](const Eigen::VectorXd& coeffs) {
    const auto field = PlateFieldOnGrid::from_coeffs(*basis_, coeffs);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int j = 0; j < grid_.my(); ++j)
      for (int i = 0; i < grid_.mx(); ++i) {
        const double J = 1.0 + field.value(grid_.plate, grid_.xc(i), grid_.yc(j));
        lo = std::min(lo, J);
        hi = std::max(hi, J);
      }
    // Nodal values participate in the guard as well; the interface must stay
    // above the bottom everywhere we can see it.
    for (int j = 0; j < grid_.plate.ny; ++j)
      for (int i = 0; i < grid_.plate.nx; ++i) {
        const double J = 1.0 + field.val(i + 1, j + 1);
        lo = std::min(lo, J);
        hi = std::max(hi, J);
      }
    return std::pair<double, double>(lo, hi);
  };

  long n = 0;
  try {
    // Life-span guard on the initial geometry.
    auto [j0_lo, j0_hi] = jacobian_range(alpha);
    if (j0_lo <= j_floor) {
      LedgerRow row;
      row.n = 0;
      row.t = 0.0;
      row.J_min = j0_lo;
      row.J_max = j0_hi;
      ledger.rows.push_back(row);
      result.outcome = RunOutcome::touched_bottom;
      result.mismatch = mismatch_report(ledger, plan_);
      return result;
    }

    double F_prev_end = ledger.F0_initial;
    for (n = 0; n < plan_.N; ++n) {
      const SspResult ssp =
          ssp_step(*basis_, *model_, alpha, v, dt, config_.tolerances.tol_ode, n);
      const Eigen::VectorXd d_avg = average_rate(alpha, ssp.alpha_end, dt);

      auto [jlo, jhi] = jacobian_range(ssp.alpha_end);
      if (jlo <= j_floor) {
        LedgerRow row;
        row.n = n;
        row.t = plan_.time_at(n + 1);
        row.mismatch_ssp = ssp.max_mismatch_norm;
        row.J_min = jlo;
        row.J_max = jhi;
        ledger.rows.push_back(row);
        result.outcome = RunOutcome::touched_bottom;
        break;
      }

      const Eigen::VectorXd M_prev = fsp_->jacobian_face_weights(alpha);
      const double plate_terms_next = 0.5 * ssp.alpha_end.dot(xi.cwiseProduct(ssp.alpha_end)) +
                                      model_->potential(*basis_, ssp.alpha_end);
      const double S_next = 0.5 / dt * ssp.dteta_sq_integral + plate_terms_next +
                            0.5 * FluidSubproblem::weighted_kinetic(u, M_prev);

      FspInputs inputs;
      inputs.u_prev_faces = u;
      inputs.eta_tilde_prev = alpha;
      inputs.eta_tilde_next = ssp.alpha_end;
      inputs.dteta_avg = d_avg;
      inputs.dt = dt;
      inputs.mu = mu;
      inputs.j_floor = j_floor;
      const FspSystem sys = fsp_->assemble(inputs, options.corrupt_convection);
      if (options.dump_systems)
        fsp_->dump_system(sys, options.dump_dir + "/fsp_system_" + std::to_string(n) + ".mtx");
      const FluidState state = fsp_->solve(sys, config_.tolerances.tol_solver);
      const FspAudit audit = fsp_->energy_audit(sys, inputs, state, plate_terms_next, S_next,
                                                config_.tolerances.tol_energy);

      LedgerRow row;
      row.n = n;
      row.t = plan_.time_at(n + 1);
      row.S = S_next;
      row.F = audit.F_next;
      row.D = audit.dissipation;
      row.mismatch_ssp = ssp.max_mismatch_norm;
      row.mismatch_fsp = (state.beta - d_avg).norm();
      row.J_min = jlo;
      row.J_max = jhi;
      row.energy_kinetic_fluid = 0.5 * FluidSubproblem::weighted_kinetic(state.faces, sys.M_next);
      row.energy_elastic = 0.5 * ssp.alpha_end.dot(xi.cwiseProduct(ssp.alpha_end));
      row.energy_plate_kinetic = 0.5 * state.beta.squaredNorm();
      row.potential = model_->potential(*basis_, ssp.alpha_end);
      row.fsp_slack = audit.slack;
      ledger.rows.push_back(row);

      ledger.lem11_residual.push_back(ssp.lem11_residual);
      ledger.ssp_drop.push_back(0.5 / dt * ssp.mismatch_sq_integral);
      ledger.fsp_drop.push_back(audit.jump_fluid + audit.jump_interface + audit.dissipation +
                                audit.slack);
      ledger.avg_rate_dev_sq.push_back(ssp.max_avg_dev_sq);
      ledger.dteta_v_end_sq.push_back((ssp.dalpha_end - state.beta).squaredNorm());
      ledger.dv_step_sq.push_back((state.beta - v).squaredNorm());

      alpha = ssp.alpha_end;
      v = state.beta;
      u = state.faces;
      F_prev_end = audit.F_next;
      result.eta_coeffs.push_back(alpha);
      result.v_coeffs.push_back(v);
      if (options.keep_velocity) result.u_faces.push_back(u);
    }
  } catch (const Error& e) {
    result.outcome = RunOutcome::error;
    result.error_message = "step " + std::to_string(n) + ": " + e.what();
    result.mismatch = mismatch_report(ledger, plan_);
    return result;
  }

  result.mismatch = mismatch_report(ledger, plan_);
  return result;
}

MismatchReport mismatch_report(const EnergyLedger& ledger, const SplittingPlan& plan) {
  MismatchReport rep;
  rep.strict = plan.strict;
  rep.dt = plan.dt();
  rep.alpha = plan.alpha;
  rep.stmt1_bound = std::pow(rep.dt, plan.alpha);
  bool finite = true;
  for (const auto& row : ledger.rows) {
    rep.stmt1_max_sq = std::max(rep.stmt1_max_sq, row.mismatch_ssp * row.mismatch_ssp);
    finite = finite && std::isfinite(row.S) && std::isfinite(row.F) && std::isfinite(row.D);
  }
  rep.stmt1_pass = rep.stmt1_max_sq <= rep.stmt1_bound * (1.0 + 1e-12);

  for (double v : ledger.avg_rate_dev_sq) rep.stmt5_max_sq = std::max(rep.stmt5_max_sq, v);
  const double dt2a = std::pow(rep.dt, 2.0 * plan.alpha);
  rep.stmt5_C_empirical = dt2a > 0.0 ? rep.stmt5_max_sq / dt2a : 0.0;
  rep.stmt5_C_paper = plan.constants.C_B > 0.0 ? 4.0 / (3.0 * plan.constants.C_B) : 0.0;
  rep.stmt5_pass = std::isfinite(rep.stmt5_max_sq);

  for (double v : ledger.dteta_v_end_sq) rep.stmt6_sum_dteta_v += v;
  for (double v : ledger.dv_step_sq) rep.stmt6_sum_dv += v;
  rep.stmt6_finite = std::isfinite(rep.stmt6_sum_dteta_v) && std::isfinite(rep.stmt6_sum_dv);

  double cumD = 0.0;
  for (const auto& row : ledger.rows) {
    cumD += row.D;
    rep.uniform_bound_max = std::max(rep.uniform_bound_max, row.F + cumD);
  }
  rep.uniform_bound_C0 = ledger.C0;
  rep.uniform_pass = ledger.rows.empty() ||
                     rep.uniform_bound_max <= ledger.C0 * (1.0 + 1e-6) + 1e-12;

  if (!ledger.rows.empty() && !ledger.ssp_drop.empty()) {
    double drops = 0.0;
    for (double v : ledger.ssp_drop) drops += v;
    for (double v : ledger.fsp_drop) drops += v;
    const double F_last = ledger.rows.back().F;
    rep.telescope_residual = std::abs(drops - (ledger.F0_initial - F_last)) /
                             std::max(1.0, std::abs(ledger.F0_initial));
  }
  return rep;
}

}  // namespace plateflow
