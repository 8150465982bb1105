#pragma once

#include <string>
#include <vector>

namespace plateflow {

// One row per time sub-interval; column order matches the CSV schema.
struct LedgerRow {
  long n = 0;
  double t = 0.0;
  double S = 0.0;  // S^{n+1}((n+1) dt)
  double F = 0.0;  // F^{n+1}((n+1) dt)
  double D = 0.0;  // 2 mu dt \int J^n |D^{n+1} u^{n+1}|^2
  double mismatch_ssp = 0.0;  // max_t ||dt eta^{n+1}(t) - v^n||_{L2,h}
  double mismatch_fsp = 0.0;  // ||v^{n+1} - avg rate||_{L2,h}
  double J_min = 1.0;
  double J_max = 1.0;
  double energy_kinetic_fluid = 0.0;
  double energy_elastic = 0.0;
  double energy_plate_kinetic = 0.0;
  double potential = 0.0;
  double fsp_slack = 0.0;

  bool operator==(const LedgerRow&) const = default;
};

struct EnergyLedger {
  std::vector<LedgerRow> rows;
  double F0_initial = 0.0;  // F^0(0)
  double C0 = 0.0;

  // Per-step diagnostics that are not CSV columns.
  std::vector<double> lem11_residual;
  std::vector<double> ssp_drop;          // (1/2dt) integral ||dt eta - v^n||^2
  std::vector<double> fsp_drop;          // jumps + dissipation + Jensen slack
  std::vector<double> avg_rate_dev_sq;   // max_t ||avg rate - dt eta(t)||^2
  std::vector<double> dteta_v_end_sq;    // ||dt eta^{n+1}(end) - v^{n+1}||^2
  std::vector<double> dv_step_sq;        // ||v^{n+1} - v^n||^2
};

inline const char* ledger_csv_header() {
  return "n,t,S,F,D,mismatch_ssp,mismatch_fsp,J_min,J_max,energy_kinetic_fluid,"
         "energy_elastic,energy_plate_kinetic,potential,fsp_slack";
}

std::string ledger_row_csv(const LedgerRow& row);
std::string ledger_csv(const EnergyLedger& ledger);
LedgerRow parse_ledger_row(const std::string& line);
std::vector<LedgerRow> parse_ledger_csv(const std::string& text);

}  // namespace plateflow
