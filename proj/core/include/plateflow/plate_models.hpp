#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

#include "plateflow/galerkin_basis.hpp"
#include "plateflow/plate_grid.hpp"

namespace plateflow {

enum class PlateModelKind { Zero, Kirchhoff, VonKarman, Berger };
enum class KirchhoffF { Linear, Cubic, Sine };

std::string to_string(PlateModelKind kind);

struct KirchhoffParams {
  double nu = 0.05;  // >= 0
  double q = 2.0;    // q > r >= 0
  double r = 0.0;
  double mu = 0.0;
  KirchhoffF f = KirchhoffF::Cubic;
  double f_scale = 1.0;
  std::optional<double> gamma_prime;  // required for data the built-ins cannot classify
  Eigen::VectorXd h;                  // interior nodal field; empty means zero
};

struct VonKarmanParams {
  Eigen::VectorXd F0;  // interior nodal field (H^4 datum); empty means zero
  Eigen::VectorXd h;
};

struct BergerParams {
  double nu = 1.0;  // > 0
  double G = 0.0;
  Eigen::VectorXd h;
};

struct PlateModelConfig {
  PlateModelKind kind = PlateModelKind::Zero;
  KirchhoffParams kirchhoff;
  VonKarmanParams von_karman;
  BergerParams berger;
  std::optional<double> kappa;  // overrides; defaults documented in the README
  std::optional<double> C_star;
  std::optional<double> a;
  std::optional<double> eps;
  unsigned long long seed = 20240801ULL;  // empirical C* sampling only
};

// Coercivity/growth constants attached to a model ((A1)-(A3) data).
struct ModelConstants {
  double kappa = 0.25;  // in (0, 1/2)
  double C_star = 0.0;  // >= 0
  double a = 0.0;       // in [0, 2)
  double eps = 1.0;     // in (0, 2]
  double lambda1 = 0.0; // discrete first Dirichlet-Laplacian eigenvalue
  bool C_star_empirical = false;
};

struct AiryField {
  Eigen::VectorXd v;  // interior nodal Airy stress values
  double residual = 0.0;
};

// von Karman bracket [w,u] = w_xx u_yy + w_yy u_xx - 2 w_xy u_xy by centered
// differences with zero boundary values. Bilinear and symmetric.
Eigen::VectorXd vk_bracket(const PlateGrid& grid, const Eigen::VectorXd& w,
                           const Eigen::VectorXd& u);

// Clamped discrete biharmonic solve B v = -Mq [eta,eta].
AiryField airy_solve(const GalerkinBasis& basis, const Eigen::VectorXd& eta_field);

// Nonlinear elastic force F(eta), its potential Pi(eta) and the assumption
// constants for the Kirchhoff / von Karman / Berger / Zero models.
//
// The discrete force is constructed as the exact gradient of the discrete
// potential (same quadratures, adjoint stencils), so the Frechet identity
// (F(eta), psi)_h = d/de Pi(eta + e psi) holds to rounding rather than to
// discretization error.
class PlateModel {
 public:
  static PlateModel make(const GalerkinBasis& basis, const PlateModelConfig& config);

  PlateModelKind kind() const { return kind_; }
  const ModelConstants& constants() const { return constants_; }
  const PlateGrid& grid() const { return grid_; }

  // Projected force coefficients ((F(eta), w_1)_h, ..., (F(eta), w_k)_h).
  Eigen::VectorXd force(const GalerkinBasis& basis, const Eigen::VectorXd& eta_coeffs) const;
  double potential(const GalerkinBasis& basis, const Eigen::VectorXd& eta_coeffs) const;

  // Nodal force field before projection (exposed for tests).
  Eigen::VectorXd force_field(const GalerkinBasis& basis, const Eigen::VectorXd& eta_coeffs) const;

 private:
  PlateModel() = default;
  PlateModelKind kind_ = PlateModelKind::Zero;
  PlateGrid grid_;
  KirchhoffParams kirchhoff_;
  VonKarmanParams von_karman_;
  BergerParams berger_;
  ModelConstants constants_;
};

struct LipschitzEstimate {
  double C_R = 0.0;      // max sampled ratio times safety factor 2
  double max_ratio = 0.0;
  double R = 0.0;
  double a = 0.0;
  int n_samples = 0;
  unsigned long long seed = 0;
};

// Empirical (A2) constant over pairs in the spectral-H^2 ball of radius R.
LipschitzEstimate estimate_lipschitz(const PlateModel& model, const GalerkinBasis& basis, double R,
                                     double a, int n_samples, unsigned long long seed);

struct CoercivityReport {
  double min_margin = 0.0;  // min of kappa*||Lap eta||^2 + Pi(eta) + C*
  bool pass = false;
  double R = 0.0;
  int n_samples = 0;
  unsigned long long seed = 0;
};

CoercivityReport check_coercivity(const PlateModel& model, const GalerkinBasis& basis, double R,
                                  int n_samples, unsigned long long seed);

// C(Pi, eta0): sampled upper bound of Pi over the spectral-H^2 ball of radius
// ||eta0||_{H^2,spec}, including eta0 itself, plus a 10% margin.
double sample_potential_bound(const PlateModel& model, const GalerkinBasis& basis,
                              const Eigen::VectorXd& eta0_coeffs, int n_samples,
                              unsigned long long seed);

// Second-derivative stencils with zero boundary values (self-adjoint in the
// grid inner product); shared by the bracket and the model adjoints.
Eigen::VectorXd dxx(const PlateGrid& g, const Eigen::VectorXd& f);
Eigen::VectorXd dyy(const PlateGrid& g, const Eigen::VectorXd& f);
Eigen::VectorXd dxy(const PlateGrid& g, const Eigen::VectorXd& f);

}  // namespace plateflow
