#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "plateflow/galerkin_basis.hpp"
#include "plateflow/plate_models.hpp"

namespace plateflow {

// Scalar datum on Gamma: zero, coefficients in the Galerkin span, or the
// analytic bump scale*sin(pi x/Lx)sin(pi y/Ly) sampled at the nodes.
struct FieldSpec {
  enum class Kind { Zero, Coeffs, SineBump };
  Kind kind = Kind::Zero;
  Eigen::VectorXd coeffs;
  double scale = 1.0;

  Eigen::VectorXd materialize(const GalerkinBasis& basis) const;
};

struct SimConfig {
  struct Geometry {
    double Lx = 1.0, Ly = 1.0;
    int nx = 16, ny = 16, nz = 8;
  } geometry;

  struct Physics {
    double mu = 0.1;
  } physics;

  struct Plate {
    PlateModelKind model = PlateModelKind::Zero;
    // kirchhoff
    double nu = 0.05, q = 2.0, r = 0.0, mu = 0.0;
    KirchhoffF f = KirchhoffF::Cubic;
    double f_scale = 1.0;
    std::optional<double> gamma_prime;
    // berger
    double berger_nu = 1.0, berger_G = 0.0;
    FieldSpec h, F0;
    std::optional<double> kappa, C_star, a, eps;
  } plate;

  struct Run {
    double T = 0.05;
    int k = 4;
    long N_user = 8;
    bool strict = true;
    double alpha = 0.5;
    double j_floor = 1e-3;
    unsigned long long seed = 1;
    Eigen::VectorXd eta0_coeffs, v0_coeffs;
    bool u0_lift = false;  // false: u0 = 0; true: u0 = lift of v0
  } run;

  struct ToleranceSet {
    double tol_energy = 1e-9;
    double tol_ode = 1e-10;
    double tol_solver = 1e-10;
  } tolerances;

  struct Output {
    std::string dir = "out";
    std::vector<std::string> formats = {"csv", "json"};  // plus "states", "slices"
    std::string basis_cache;                             // optional path
  } output;

  struct Lipschitz {
    std::optional<double> R;
    int n_samples = 200;
  } lipschitz;

  static SimConfig from_json_text(const std::string& text);
  static SimConfig from_json_file(const std::string& path);
  std::string to_json_text() const;

  // Throws ParameterError listing every offending key.
  void validate() const;

  PlateGrid plate_grid() const { return {geometry.Lx, geometry.Ly, geometry.nx, geometry.ny}; }
  PlateModelConfig model_config(const GalerkinBasis& basis) const;
  bool has_format(const std::string& f) const;
};

}  // namespace plateflow
