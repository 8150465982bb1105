#include "plateflow/energy_ledger.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "plateflow/errors.hpp"

namespace plateflow {

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string ledger_row_csv(const LedgerRow& r) {
  std::string s = std::to_string(r.n);
  for (double v : {r.t, r.S, r.F, r.D, r.mismatch_ssp, r.mismatch_fsp, r.J_min, r.J_max,
                   r.energy_kinetic_fluid, r.energy_elastic, r.energy_plate_kinetic, r.potential,
                   r.fsp_slack})
    s += "," + fmt(v);
  return s;
}

std::string ledger_csv(const EnergyLedger& ledger) {
  std::string out = ledger_csv_header();
  out += "\n";
  for (const auto& r : ledger.rows) {
    out += ledger_row_csv(r);
    out += "\n";
  }
  return out;
}

LedgerRow parse_ledger_row(const std::string& line) {
  std::vector<double> vals;
  std::string token;
  std::istringstream in(line);
  while (std::getline(in, token, ',')) vals.push_back(std::strtod(token.c_str(), nullptr));
  if (vals.size() != 14) throw ParameterError("ledger CSV row has " + std::to_string(vals.size()) +
                                              " fields, expected 14");
  LedgerRow r;
  r.n = static_cast<long>(vals[0]);
  r.t = vals[1];
  r.S = vals[2];
  r.F = vals[3];
  r.D = vals[4];
  r.mismatch_ssp = vals[5];
  r.mismatch_fsp = vals[6];
  r.J_min = vals[7];
  r.J_max = vals[8];
  r.energy_kinetic_fluid = vals[9];
  r.energy_elastic = vals[10];
  r.energy_plate_kinetic = vals[11];
  r.potential = vals[12];
  r.fsp_slack = vals[13];
  return r;
}

std::vector<LedgerRow> parse_ledger_csv(const std::string& text) {
  std::vector<LedgerRow> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      if (line != ledger_csv_header())
        throw ParameterError("ledger CSV header mismatch: " + line);
      first = false;
      continue;
    }
    rows.push_back(parse_ledger_row(line));
  }
  return rows;
}

}  // namespace plateflow
