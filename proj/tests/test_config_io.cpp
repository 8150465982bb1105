#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "plateflow/energy_ledger.hpp"
#include "plateflow/sim_config.hpp"
#include "plateflow/splitting_driver.hpp"
#include "plateflow/verify.hpp"

using namespace plateflow;

namespace {

// Minimal JSON-schema checker covering the subset the shipped schema uses:
// type, required, properties, enum, array items.
bool schema_check(const nlohmann::json& schema, const nlohmann::json& value, std::string& err) {
  if (schema.contains("type")) {
    const std::string t = schema["type"];
    const bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
                    (t == "string" && value.is_string()) ||
                    (t == "integer" && value.is_number_integer()) ||
                    (t == "number" && value.is_number()) ||
                    (t == "boolean" && value.is_boolean());
    if (!ok) {
      err = "type mismatch: expected " + t;
      return false;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == value;
    if (!found) {
      err = "value not in enum";
      return false;
    }
  }
  if (schema.contains("required"))
    for (const auto& key : schema["required"])
      if (!value.contains(key.get<std::string>())) {
        err = "missing required key " + key.get<std::string>();
        return false;
      }
  if (schema.contains("properties") && value.is_object())
    for (const auto& [key, sub] : schema["properties"].items())
      if (value.contains(key) && !schema_check(sub, value[key], err)) {
        err = key + ": " + err;
        return false;
      }
  if (schema.contains("items") && value.is_array())
    for (const auto& item : value)
      if (!schema_check(schema["items"], item, err)) return false;
  return true;
}

}  // namespace

TEST_CASE("ledger CSV rows round trip bitwise") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    LedgerRow row;
    row.n = t;
    row.t = unif(rng) * 1e-3;
    row.S = unif(rng) * std::pow(10.0, (t % 17) - 8);
    row.F = unif(rng);
    row.D = std::abs(unif(rng)) * 1e-12;
    row.mismatch_ssp = std::abs(unif(rng));
    row.mismatch_fsp = std::abs(unif(rng)) * 1e-7;
    row.J_min = 1.0 + unif(rng) * 0.5;
    row.J_max = row.J_min + std::abs(unif(rng));
    row.energy_kinetic_fluid = unif(rng);
    row.energy_elastic = unif(rng);
    row.energy_plate_kinetic = unif(rng);
    row.potential = unif(rng);
    row.fsp_slack = unif(rng) * 1e-15;
    const LedgerRow parsed = parse_ledger_row(ledger_row_csv(row));
    CHECK(parsed == row);
  }

  SUBCASE("full document round trip") {
    EnergyLedger ledger;
    for (int n = 0; n < 5; ++n) {
      LedgerRow row;
      row.n = n;
      row.t = 0.1 * (n + 1) / 3.0;
      row.S = 1.0 / (n + 3.0);
      ledger.rows.push_back(row);
    }
    const auto parsed = parse_ledger_csv(ledger_csv(ledger));
    REQUIRE(parsed.size() == 5);
    for (int n = 0; n < 5; ++n) CHECK(parsed[n] == ledger.rows[n]);
  }
  SUBCASE("header is the schema") {
    CHECK(std::string(ledger_csv_header()) ==
          "n,t,S,F,D,mismatch_ssp,mismatch_fsp,J_min,J_max,energy_kinetic_fluid,"
          "energy_elastic,energy_plate_kinetic,potential,fsp_slack");
  }
}

TEST_CASE("config validation lists every offending key") {
  SimConfig cfg;
  cfg.geometry.nx = 2;        // bad
  cfg.run.T = -1.0;           // bad
  cfg.run.alpha = 2.5;        // bad
  cfg.tolerances.tol_ode = 0; // bad
  try {
    cfg.validate();
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("geometry.nx") != std::string::npos);
    CHECK(msg.find("run.T") != std::string::npos);
    CHECK(msg.find("run.alpha") != std::string::npos);
    CHECK(msg.find("tolerances.tol_ode") != std::string::npos);
  }
}

TEST_CASE("config JSON parse and round trip") {
  const std::string text = R"json({
    "geometry": {"Lx": 2.0, "Ly": 1.5, "nx": 10, "ny": 8, "nz": 5},
    "physics": {"mu": 0.25},
    "plate": {"model": "berger", "berger_nu": 2.0, "berger_G": -0.5,
              "h": {"expr": "sine_bump", "scale": 0.3}, "kappa": 0.1},
    "run": {"T": 0.04, "k": 3, "N_user": 7, "strict": false, "alpha": 0.75,
            "eta0_coeffs": [0.01, 0.0, -0.02], "u0": "lift_v0", "seed": 77},
    "tolerances": {"tol_energy": 1e-8},
    "output": {"dir": "/tmp/x", "formats": ["csv", "states"]},
    "lipschitz": {"R": 0.5, "n_samples": 120}
  })json";
  const SimConfig cfg = SimConfig::from_json_text(text);
  cfg.validate();
  CHECK(cfg.geometry.Lx == 2.0);
  CHECK(cfg.plate.model == PlateModelKind::Berger);
  CHECK(cfg.plate.kappa.value() == 0.1);
  CHECK(cfg.plate.h.kind == FieldSpec::Kind::SineBump);
  CHECK(cfg.run.N_user == 7);
  CHECK(cfg.run.u0_lift);
  CHECK(cfg.run.seed == 77);
  CHECK(cfg.lipschitz.R.value() == 0.5);
  CHECK(cfg.has_format("states"));
  CHECK_FALSE(cfg.has_format("json"));

  const SimConfig again = SimConfig::from_json_text(cfg.to_json_text());
  CHECK(again.geometry.Lx == cfg.geometry.Lx);
  CHECK(again.plate.model == cfg.plate.model);
  CHECK(again.run.N_user == cfg.run.N_user);
  CHECK(again.plate.h.scale == cfg.plate.h.scale);

  SUBCASE("bad JSON and bad keys error out") {
    CHECK_THROWS_AS(SimConfig::from_json_text("{"), ParameterError);
    CHECK_THROWS_AS(SimConfig::from_json_text(R"({"plate": {"model": "beam"}})"),
                    ParameterError);
    CHECK_THROWS_AS(SimConfig::from_json_text(R"({"run": {"u0": "splash"}})"), ParameterError);
  }
}

TEST_CASE("field spec materialization") {
  const PlateGrid grid{1.0, 1.0, 8, 8};
  const auto basis = GalerkinBasis::build(grid, 3);

  FieldSpec zero;
  CHECK(zero.materialize(basis).size() == 0);

  FieldSpec coeffs;
  coeffs.kind = FieldSpec::Kind::Coeffs;
  coeffs.coeffs = Eigen::VectorXd::Unit(2, 1);
  const Eigen::VectorXd f = coeffs.materialize(basis);
  CHECK((f - basis.mode_field(1)).cwiseAbs().maxCoeff() <= 1e-15);

  FieldSpec bump;
  bump.kind = FieldSpec::Kind::SineBump;
  bump.scale = 2.0;
  const Eigen::VectorXd b = bump.materialize(basis);
  CHECK(b.size() == grid.interior_count());
  CHECK(b.maxCoeff() <= 2.0 + 1e-12);
  CHECK(b.minCoeff() >= 0.0);
}

TEST_CASE("summary JSON validates against the shipped schema") {
  SimConfig cfg;
  cfg.geometry = {1.0, 1.0, 8, 8, 4};
  cfg.plate.model = PlateModelKind::Zero;
  cfg.run.T = 0.01;
  cfg.run.k = 2;
  cfg.run.N_user = 2;
  cfg.run.strict = false;
  const Simulation sim(cfg);
  const RunResult res = sim.run();
  const nlohmann::json summary = nlohmann::json::parse(summary_json(res, sim));

#ifndef PLATEFLOW_SCHEMA_FOR_TESTS
#define PLATEFLOW_SCHEMA_FOR_TESTS "tools/schema/summary.schema.json"
#endif
  std::ifstream sf(PLATEFLOW_SCHEMA_FOR_TESTS);
  REQUIRE(sf.good());
  const nlohmann::json schema = nlohmann::json::parse(sf);
  std::string err;
  const bool ok = schema_check(schema, summary, err);
  INFO(err);
  CHECK(ok);
}

TEST_CASE("eigs report cross-checks") {
  SimConfig cfg;
  cfg.geometry = {1.0, 1.0, 10, 10, 4};
  cfg.plate.model = PlateModelKind::Kirchhoff;
  cfg.run.T = 0.02;
  cfg.run.N_user = 1;
  cfg.run.strict = false;
  cfg.run.eta0_coeffs = Eigen::VectorXd::Zero(1);
  cfg.run.eta0_coeffs[0] = 0.01;

  auto report_fields = [](const std::string& text) {
    std::map<std::string, double> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) continue;
      out[line.substr(0, eq)] = std::strtod(line.c_str() + eq + 3, nullptr);
    }
    return out;
  };

  SUBCASE("k=1 is consistent with compute_N_min") {
    cfg.run.k = 1;
    const Simulation sim(cfg);
    const auto f = report_fields(eigs_report(sim));
    CHECK(f.count("xi[1]") == 1);
    CHECK(f.count("xi[2]") == 0);
    CHECK(static_cast<long>(f.at("N_min")) ==
          compute_N_min(sim.plan().T, sim.plan().alpha, sim.plan().a, sim.basis().eigenvalues(),
                        sim.plan().constants));
    CHECK(static_cast<long>(f.at("N_min")) == sim.plan().N_min);
  }
  SUBCASE("printed eigenvalue sum matches independent summation; N_min monotone in k") {
    cfg.run.k = 4;
    const Simulation sim4(cfg);
    const auto f4 = report_fields(eigs_report(sim4));
    double sum = 0.0;
    for (int i = 1; i <= 4; ++i)
      sum += std::pow(f4.at("xi[" + std::to_string(i) + "]"), 0.5 * f4.at("a"));
    CHECK(sum == doctest::Approx(f4.at("sum_xi_a2")).epsilon(1e-12));

    cfg.run.k = 8;
    const Simulation sim8(cfg);
    const auto f8 = report_fields(eigs_report(sim8));
    CHECK(f8.at("N_min") >= f4.at("N_min"));
    CHECK(f8.at("N_min_CGamma2") >= f8.at("N_min"));  // sensitivity companion
  }
}

TEST_CASE("basis cache through the config round trips bit-exactly") {
  SimConfig cfg;
  cfg.geometry = {1.0, 1.0, 8, 8, 4};
  cfg.plate.model = PlateModelKind::Zero;
  cfg.run.T = 0.005;
  cfg.run.k = 2;
  cfg.run.N_user = 2;
  cfg.run.strict = false;
  cfg.run.eta0_coeffs = Eigen::VectorXd::Zero(2);
  cfg.run.eta0_coeffs[0] = 0.02;
  cfg.output.basis_cache =
      (std::filesystem::temp_directory_path() / "pf_cfg_cache.json").string();
  std::remove(cfg.output.basis_cache.c_str());

  const Simulation first(cfg);   // builds and saves the cache
  const Simulation second(cfg);  // loads it
  CHECK((first.basis().eigenvalues().array() == second.basis().eigenvalues().array()).all());
  const std::string csv1 = ledger_csv(first.run().ledger);
  const std::string csv2 = ledger_csv(second.run().ledger);
  CHECK(csv1 == csv2);
  std::remove(cfg.output.basis_cache.c_str());
}
