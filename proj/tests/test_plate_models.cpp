#include <doctest.h>

#include <cmath>
#include <random>

#include "plateflow/plate_models.hpp"

using namespace plateflow;

namespace {

const PlateGrid kGrid{1.0, 1.0, 12, 12};

Eigen::VectorXd sample(const PlateGrid& g, double (*f)(double, double)) {
  Eigen::VectorXd out(g.interior_count());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out[g.index(i, j)] = f(g.x(i), g.y(j));
  return out;
}

bool interior_away_from_boundary(const PlateGrid& g, int i, int j) {
  return i >= 2 && i < g.nx - 2 && j >= 2 && j < g.ny - 2;
}

// Quadrature oracle for int |grad eta|^2 with the cell-midpoint rule the
// models use, written independently with plain loops over cell corners.
double oracle_gradient_energy(const PlateGrid& g, const Eigen::VectorXd& eta) {
  const Eigen::MatrixXd e = extend_with_boundary(g, eta);
  double acc = 0.0;
  for (int cj = 0; cj <= g.ny; ++cj)
    for (int ci = 0; ci <= g.nx; ++ci) {
      const double gx = (e(ci + 1, cj) - e(ci, cj) + e(ci + 1, cj + 1) - e(ci, cj + 1)) /
                        (2.0 * g.hx());
      const double gy = (e(ci, cj + 1) - e(ci, cj) + e(ci + 1, cj + 1) - e(ci + 1, cj)) /
                        (2.0 * g.hy());
      acc += gx * gx + gy * gy;
    }
  return acc * g.quad_weight();
}

// Direct stencil application of the discrete -div(grad .) the Berger force
// uses: scatter cell gradients back through the corner adjoint.
Eigen::VectorXd oracle_cell_laplacian(const PlateGrid& g, const Eigen::VectorXd& eta) {
  const Eigen::MatrixXd e = extend_with_boundary(g, eta);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.interior_count());
  for (int cj = 0; cj <= g.ny; ++cj)
    for (int ci = 0; ci <= g.nx; ++ci) {
      const double gx = (e(ci + 1, cj) - e(ci, cj) + e(ci + 1, cj + 1) - e(ci, cj + 1)) /
                        (2.0 * g.hx());
      const double gy = (e(ci, cj + 1) - e(ci, cj) + e(ci + 1, cj + 1) - e(ci + 1, cj)) /
                        (2.0 * g.hy());
      for (int db = 0; db <= 1; ++db)
        for (int da = 0; da <= 1; ++da) {
          const int a = ci + da, b = cj + db;
          if (a < 1 || a > g.nx || b < 1 || b > g.ny) continue;
          out[g.index(a - 1, b - 1)] += gx * (da ? 1.0 : -1.0) / (2.0 * g.hx()) +
                                        gy * (db ? 1.0 : -1.0) / (2.0 * g.hy());
        }
    }
  return out;
}

PlateModel make_model(const GalerkinBasis& basis, PlateModelKind kind) {
  PlateModelConfig cfg;
  cfg.kind = kind;
  if (kind == PlateModelKind::Kirchhoff) {
    cfg.kirchhoff.nu = 0.05;
    cfg.kirchhoff.q = 2.0;
    cfg.kirchhoff.r = 0.0;
    cfg.kirchhoff.mu = 0.0;
    cfg.kirchhoff.f = KirchhoffF::Cubic;
    cfg.kirchhoff.f_scale = 1.0;
  }
  if (kind == PlateModelKind::VonKarman) {
    GalerkinBasis* b = nullptr;
    (void)b;
  }
  if (kind == PlateModelKind::Berger) {
    cfg.berger.nu = 1.0;
    cfg.berger.G = 0.0;
  }
  return PlateModel::make(basis, cfg);
}

}  // namespace

TEST_CASE("von Karman bracket on polynomial data") {
  const auto wxx = sample(kGrid, [](double x, double) { return 0.5 * x * x; });
  const auto wyy = sample(kGrid, [](double, double y) { return 0.5 * y * y; });
  const auto b = vk_bracket(kGrid, wxx, wyy);
  for (int j = 0; j < kGrid.ny; ++j)
    for (int i = 0; i < kGrid.nx; ++i)
      if (interior_away_from_boundary(kGrid, i, j))
        CHECK(b[kGrid.index(i, j)] == doctest::Approx(1.0).epsilon(1e-10));

  SUBCASE("symmetry") {
    const auto ba = vk_bracket(kGrid, wxx, wyy);
    const auto bb = vk_bracket(kGrid, wyy, wxx);
    CHECK((ba - bb).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("mixed term") {
    const auto wxy = sample(kGrid, [](double x, double y) { return x * y; });
    const auto m = vk_bracket(kGrid, wxy, wxy);
    for (int j = 0; j < kGrid.ny; ++j)
      for (int i = 0; i < kGrid.nx; ++i)
        if (interior_away_from_boundary(kGrid, i, j))
          CHECK(m[kGrid.index(i, j)] == doctest::Approx(-2.0).epsilon(1e-10));
  }
  SUBCASE("bilinearity") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd w1(kGrid.interior_count()), w2(kGrid.interior_count()),
        u(kGrid.interior_count());
    for (int i = 0; i < w1.size(); ++i) {
      w1[i] = gauss(rng);
      w2[i] = gauss(rng);
      u[i] = gauss(rng);
    }
    const double al = 0.7, be = -1.3;
    const auto lhs = vk_bracket(kGrid, al * w1 + be * w2, u);
    const auto rhs = al * vk_bracket(kGrid, w1, u) + be * vk_bracket(kGrid, w2, u);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
  SUBCASE("grid mismatch") {
    CHECK_THROWS_AS(vk_bracket(kGrid, wxx, Eigen::VectorXd::Zero(5)), ParameterError);
  }
}

TEST_CASE("airy solve") {
  const auto basis = GalerkinBasis::build(kGrid, 4);
  SUBCASE("zero displacement gives zero stress") {
    const auto airy = airy_solve(basis, Eigen::VectorXd::Zero(kGrid.interior_count()));
    CHECK(airy.v.cwiseAbs().maxCoeff() == 0.0);
    CHECK(airy.residual == 0.0);
  }
  SUBCASE("residual on a mode") {
    const auto airy = airy_solve(basis, basis.mode_field(0));
    CHECK(airy.residual <= 1e-10);
    // direct substitution into the assembled system
    const Eigen::VectorXd rhs =
        -kGrid.quad_weight() * vk_bracket(kGrid, basis.mode_field(0), basis.mode_field(0));
    CHECK((basis.biharmonic() * airy.v - rhs).norm() <= 1e-10 * rhs.norm());
  }
  SUBCASE("quadratic scaling") {
    const Eigen::VectorXd eta = basis.mode_field(0) + 0.5 * basis.mode_field(2);
    const auto a1 = airy_solve(basis, eta);
    const auto a2 = airy_solve(basis, 2.0 * eta);
    CHECK((a2.v - 4.0 * a1.v).cwiseAbs().maxCoeff() <=
          1e-9 * std::max(1.0, a1.v.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("force special values") {
  const auto basis = GalerkinBasis::build(kGrid, 4);
  SUBCASE("zero model") {
    const auto model = make_model(basis, PlateModelKind::Zero);
    Eigen::VectorXd c(4);
    c << 0.4, -0.1, 0.2, 0.0;
    CHECK(model.force(basis, c).cwiseAbs().maxCoeff() == 0.0);
    CHECK(model.potential(basis, c) == 0.0);
  }
  SUBCASE("kirchhoff with vanishing data at the origin") {
    PlateModelConfig cfg;
    cfg.kind = PlateModelKind::Kirchhoff;
    cfg.kirchhoff.nu = 0.1;
    cfg.kirchhoff.f = KirchhoffF::Linear;
    cfg.kirchhoff.f_scale = 0.0;
    const auto model = PlateModel::make(basis, cfg);
    CHECK(model.force(basis, Eigen::VectorXd::Zero(4)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("berger force matches the quadrature oracle") {
    PlateModelConfig cfg;
    cfg.kind = PlateModelKind::Berger;
    cfg.berger.nu = 2.0;
    cfg.berger.G = 0.3;
    const auto model = PlateModel::make(basis, cfg);
    const Eigen::VectorXd eta = Eigen::VectorXd::Unit(4, 0);
    const Eigen::VectorXd w1 = basis.mode_field(0);
    const double I1 = oracle_gradient_energy(kGrid, w1);
    const Eigen::VectorXd expected =
        basis.project(-(cfg.berger.nu * I1 - cfg.berger.G) * (-oracle_cell_laplacian(kGrid, w1)));
    const Eigen::VectorXd got = model.force(basis, eta);
    CHECK((got - expected).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("potential special values") {
  const auto basis = GalerkinBasis::build(kGrid, 4);
  SUBCASE("berger potential is a nonnegative square for G=0, h=0") {
    PlateModelConfig cfg;
    cfg.kind = PlateModelKind::Berger;
    cfg.berger.nu = 1.5;
    cfg.berger.G = 0.0;
    const auto model = PlateModel::make(basis, cfg);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd c(4);
      for (int i = 0; i < 4; ++i) c[i] = 0.3 * gauss(rng);
      const double I1 = oracle_gradient_energy(kGrid, basis.nodal(c));
      CHECK(model.potential(basis, c) ==
            doctest::Approx(0.25 * cfg.berger.nu * I1 * I1).epsilon(1e-10));
      CHECK(model.potential(basis, c) >= 0.0);
    }
  }
}

TEST_CASE("potential-force Frechet consistency at order two") {
  const auto basis = GalerkinBasis::build(kGrid, 4);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss;
  auto draw = [&]() {
    Eigen::VectorXd c(4);
    for (int i = 0; i < 4; ++i) c[i] = 0.4 * gauss(rng) / std::sqrt(basis.xi(i));
    return c;
  };
  PlateModelConfig vk_cfg;
  vk_cfg.kind = PlateModelKind::VonKarman;
  vk_cfg.von_karman.F0 = 0.4 * basis.mode_field(1);
  vk_cfg.von_karman.h = 0.2 * basis.mode_field(0);

  PlateModelConfig kir_cfg;
  kir_cfg.kind = PlateModelKind::Kirchhoff;
  kir_cfg.kirchhoff.nu = 0.08;
  kir_cfg.kirchhoff.q = 2.0;
  kir_cfg.kirchhoff.r = 0.0;
  kir_cfg.kirchhoff.mu = -0.5;
  kir_cfg.kirchhoff.f = KirchhoffF::Sine;
  kir_cfg.kirchhoff.f_scale = 2.0;

  PlateModelConfig ber_cfg;
  ber_cfg.kind = PlateModelKind::Berger;
  ber_cfg.berger.nu = 1.0;
  ber_cfg.berger.G = 0.4;
  ber_cfg.berger.h = 0.1 * basis.mode_field(2);

  for (const auto& cfg : {vk_cfg, kir_cfg, ber_cfg}) {
    const auto model = PlateModel::make(basis, cfg);
    const Eigen::VectorXd eta = draw(), psi = draw();
    const double ref = model.force(basis, eta).dot(psi);
    double K_prev = -1.0;
    for (double eps : {1e-3, 1e-4}) {
      const double dp = model.potential(basis, eta + eps * psi);
      const double dm = model.potential(basis, eta - eps * psi);
      const double diff = std::abs((dp - dm) / (2.0 * eps) - ref);
      const double K = diff / (eps * eps);
      if (K_prev >= 0.0 && diff > 1e-12) CHECK(K <= 4.0 * std::max(K_prev, 1e-9));
      if (K_prev >= 0.0 && diff > 1e-12) CHECK(K >= 0.25 * K_prev - 1e-9);
      K_prev = K;
    }
  }
}

TEST_CASE("coercivity reports") {
  const auto basis = GalerkinBasis::build(kGrid, 4);
  SUBCASE("zero model") {
    const auto model = make_model(basis, PlateModelKind::Zero);
    const auto rep = check_coercivity(model, basis, 3.0, 300, 1);
    CHECK(rep.pass);
    CHECK(rep.min_margin >= 0.0);
  }
  SUBCASE("berger without load") {
    PlateModelConfig cfg;
    cfg.kind = PlateModelKind::Berger;
    cfg.berger.nu = 1.0;
    cfg.berger.G = 0.0;
    cfg.kappa = 0.05;
    const auto model = PlateModel::make(basis, cfg);
    CHECK(model.constants().C_star == 0.0);
    const auto rep = check_coercivity(model, basis, 3.0, 300, 2);
    CHECK(rep.pass);
    CHECK(rep.min_margin >= 0.0);
  }
  SUBCASE("kirchhoff cubic with nonpositive mu") {
    PlateModelConfig cfg;
    cfg.kind = PlateModelKind::Kirchhoff;
    cfg.kirchhoff.nu = 0.1;
    cfg.kirchhoff.mu = -1.0;
    cfg.kirchhoff.f = KirchhoffF::Cubic;
    const auto model = PlateModel::make(basis, cfg);
    CHECK(model.constants().C_star == 0.0);
    const auto rep = check_coercivity(model, basis, 3.0, 300, 3);
    CHECK(rep.pass);
    CHECK(rep.min_margin >= 0.0);
  }
}

TEST_CASE("lipschitz estimates") {
  const auto basis = GalerkinBasis::build(kGrid, 4);
  SUBCASE("zero model has zero constant") {
    const auto model = make_model(basis, PlateModelKind::Zero);
    const auto est = estimate_lipschitz(model, basis, 1.0, 0.0, 150, 9);
    CHECK(est.C_R == 0.0);
  }
  SUBCASE("near-Laplacian Berger stays below the spectral bound") {
    PlateModelConfig cfg;
    cfg.kind = PlateModelKind::Berger;
    cfg.berger.nu = 1e-12;
    cfg.berger.G = 1.0;  // force ~ +Lap eta
    const auto model = PlateModel::make(basis, cfg);
    const auto est = estimate_lipschitz(model, basis, 1.0, 0.0, 150, 10);
    CHECK(est.C_R <= 2.0);
  }
  SUBCASE("identity force matches the lattice brute force") {
    PlateModelConfig cfg;
    cfg.kind = PlateModelKind::Kirchhoff;
    cfg.kirchhoff.nu = 0.0;
    cfg.kirchhoff.f = KirchhoffF::Linear;
    cfg.kirchhoff.f_scale = 1.0;
    const auto model = PlateModel::make(basis, cfg);
    const double a = 0.5, R = 1.0;
    const auto est = estimate_lipschitz(model, basis, R, a, 200, 11);

    // deterministic lattice of coefficient pairs
    double brute = 0.0;
    const int steps = 6;  // 6^4 = 1296 directions
    Eigen::VectorXd d(4);
    for (int i0 = 0; i0 < steps; ++i0)
      for (int i1 = 0; i1 < steps; ++i1)
        for (int i2 = 0; i2 < steps; ++i2)
          for (int i3 = 0; i3 < steps; ++i3) {
            d << i0 - 2.5, i1 - 2.5, i2 - 2.5, i3 - 2.5;
            if (d.norm() == 0.0) continue;
            const Eigen::VectorXd eta1 = 0.3 * d / d.norm();
            const Eigen::VectorXd eta2 = -eta1;
            const Eigen::VectorXd df = model.force(basis, eta1) - model.force(basis, eta2);
            brute = std::max(brute, basis.spectral_sobolev_norm(df, -a) /
                                        basis.spectral_sobolev_norm(eta1 - eta2, 2.0));
          }
    CHECK(est.C_R / 2.0 >= 0.5 * brute);
    CHECK(est.C_R / 2.0 <= 2.0 * brute);
  }
  SUBCASE("too few samples rejected") {
    const auto model = make_model(basis, PlateModelKind::Zero);
    CHECK_THROWS_AS(estimate_lipschitz(model, basis, 1.0, 0.0, 50, 1), ParameterError);
  }
}

TEST_CASE("model growth validation") {
  const auto basis = GalerkinBasis::build(kGrid, 4);
  PlateModelConfig cfg;
  cfg.kind = PlateModelKind::Kirchhoff;
  cfg.kirchhoff.f = KirchhoffF::Cubic;
  cfg.kirchhoff.f_scale = -1.0;  // liminf f(s)/s = -infinity
  CHECK_THROWS_AS(PlateModel::make(basis, cfg), ParameterError);

  PlateModelConfig bad_kappa;
  bad_kappa.kind = PlateModelKind::Zero;
  bad_kappa.kappa = 0.5;
  CHECK_THROWS_AS(PlateModel::make(basis, bad_kappa), ParameterError);

  PlateModelConfig bad_berger;
  bad_berger.kind = PlateModelKind::Berger;
  bad_berger.berger.nu = 0.0;
  CHECK_THROWS_AS(PlateModel::make(basis, bad_berger), ParameterError);
}

TEST_CASE("forces are pure functions") {
  const auto basis = GalerkinBasis::build(kGrid, 4);
  PlateModelConfig cfg;
  cfg.kind = PlateModelKind::VonKarman;
  const auto model = PlateModel::make(basis, cfg);
  Eigen::VectorXd c(4);
  c << 0.2, -0.3, 0.1, 0.05;
  const Eigen::VectorXd f1 = model.force(basis, c);
  const Eigen::VectorXd f2 = model.force(basis, c);
  CHECK((f1.array() == f2.array()).all());
  CHECK(model.potential(basis, c) == model.potential(basis, c));
}
