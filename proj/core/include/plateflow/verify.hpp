#pragma once

#include <string>
#include <vector>

#include "plateflow/sim_config.hpp"
#include "plateflow/splitting_driver.hpp"

namespace plateflow {

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  bool corrupt_convection = false;  // debug hook: flips the convection pairing
};

// The ordered verification suites behind `verify`: basis Rayleigh identity,
// geometric identity refinement, model gradient consistency, coercivity,
// SSP closed forms, FSP skew/zero checks, and a short strict run with full
// ledger audits.
std::vector<SuiteResult> run_verification(const SimConfig& config, const VerifyOptions& options = {});

struct ConvergenceRow {
  long N = 0;
  double eta_diff = 0.0;  // max_t ||eta_level - eta_finest||_{L2,h}
  double u_diff = 0.0;    // ||u_level - u_finest||_{L2(0,T;L2,h)}
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;  // coarse to fine, finest excluded
  bool monotone = false;
};

ConvergenceTable converge(const SimConfig& config, int levels);

// summary.json payload for a finished run.
std::string summary_json(const RunResult& result, const Simulation& sim);

// `eigs` payload: eigenvalues and the factor-by-factor N_min breakdown,
// including the C_Gamma sensitivity companion value.
std::string eigs_report(const Simulation& sim);

}  // namespace plateflow
