#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "plateflow/energy_ledger.hpp"
#include "plateflow/errors.hpp"
#include "plateflow/sim_config.hpp"
#include "plateflow/splitting_driver.hpp"
#include "plateflow/verify.hpp"

namespace {

using namespace plateflow;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitTouchedBottom = 2;
constexpr int kExitVerifyFail = 3;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SimConfig load_config(const std::string& path, const std::string& out_override) {
  SimConfig cfg = SimConfig::from_json_file(path);
  if (!out_override.empty()) cfg.output.dir = out_override;
  if (const char* env = std::getenv("OUTPUT_DIR")) cfg.output.dir = env;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_states(const fs::path& dir, const RunResult& res) {
  std::ostringstream out;
  const int k = res.plan.k;
  out << "n,t";
  for (int i = 0; i < k; ++i) out << ",eta_" << (i + 1);
  for (int i = 0; i < k; ++i) out << ",v_" << (i + 1);
  out << "\n";
  for (size_t n = 0; n < res.eta_coeffs.size(); ++n) {
    out << n << "," << fmt(res.plan.time_at(static_cast<long>(n)));
    for (int i = 0; i < k; ++i) out << "," << fmt(res.eta_coeffs[n][i]);
    for (int i = 0; i < k; ++i) out << "," << fmt(res.v_coeffs[n][i]);
    out << "\n";
  }
  write_text(dir / "states.csv", out.str());
}

void write_slices(const fs::path& dir, const RunResult& res, const Simulation& sim) {
  const ReferenceGrid& g = sim.grid();
  for (size_t n = 0; n < res.u_faces.size(); ++n) {
    std::ostringstream out;
    out << "i,j,x,y,u3_top\n";
    for (int j = 0; j < g.my(); ++j)
      for (int i = 0; i < g.mx(); ++i)
        out << i << "," << j << "," << fmt(g.xc(i)) << "," << fmt(g.yc(j)) << ","
            << fmt(res.u_faces[n][g.iu3(i, j, g.mz())]) << "\n";
    write_text(dir / ("slice_top_" + std::to_string(n) + ".csv"), out.str());
  }
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool dump_systems) {
  const SimConfig cfg = load_config(config_path, out_dir);
  const fs::path dir(cfg.output.dir);
  fs::create_directories(dir);

  const Simulation sim(cfg);
  RunOptions opt;
  opt.keep_velocity = cfg.has_format("slices");
  opt.dump_systems = dump_systems;
  opt.dump_dir = dir.string();
  const RunResult res = sim.run(opt);

  if (cfg.has_format("csv")) write_text(dir / "ledger.csv", ledger_csv(res.ledger));
  if (cfg.has_format("json")) write_text(dir / "summary.json", summary_json(res, sim));
  if (cfg.has_format("states")) write_states(dir, res);
  if (cfg.has_format("slices")) write_slices(dir, res, sim);

  std::cout << "outcome: " << to_string(res.outcome) << " after " << res.ledger.rows.size()
            << " of " << res.plan.N << " steps (N_min " << res.plan.N_min << ")\n";
  if (!res.error_message.empty()) std::cerr << res.error_message << "\n";
  switch (res.outcome) {
    case RunOutcome::completed: return kExitOk;
    case RunOutcome::touched_bottom: return kExitTouchedBottom;
    case RunOutcome::error: return kExitError;
  }
  return kExitError;
}

int cmd_verify(const std::string& config_path, const std::string& out_dir,
               bool corrupt_convection) {
  const SimConfig cfg = load_config(config_path, out_dir);
  VerifyOptions opt;
  opt.corrupt_convection = corrupt_convection;
  const auto suites = run_verification(cfg, opt);
  bool all = true;
  for (const auto& s : suites) {
    std::cout << (s.pass ? "PASS" : "FAIL") << "  " << s.name << ": " << s.detail << "\n";
    all = all && s.pass;
  }
  return all ? kExitOk : kExitVerifyFail;
}

int cmd_converge(const std::string& config_path, const std::string& out_dir, int levels) {
  const SimConfig cfg = load_config(config_path, out_dir);
  const ConvergenceTable table = converge(cfg, levels);
  std::cout << "N,eta_diff,u_diff\n";
  for (const auto& row : table.rows)
    std::cout << row.N << "," << fmt(row.eta_diff) << "," << fmt(row.u_diff) << "\n";
  std::cout << (table.monotone ? "monotone decrease: yes" : "monotone decrease: FAIL") << "\n";
  return table.monotone ? kExitOk : kExitVerifyFail;
}

int cmd_eigs(const std::string& config_path, const std::string& out_dir) {
  const SimConfig cfg = load_config(config_path, out_dir);
  const Simulation sim(cfg);
  std::cout << eigs_report(sim);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plateflow: splitting scheme for a 3D flow coupled to a nonlinear clamped plate"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int levels = 3;
  bool dump_systems = false, corrupt_convection = false;

  auto* run = app.add_subcommand("run", "run the splitting scheme and write ledger outputs");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--out", out_dir, "output directory override");
  run->add_flag("--debug-dump-system", dump_systems, "dump assembled systems in MatrixMarket form");

  auto* verify = app.add_subcommand("verify", "run the verification suites");
  verify->add_option("config", config_path, "JSON config file")->required();
  verify->add_option("--out", out_dir, "output directory override");
  verify
      ->add_flag("--debug-corrupt-convection", corrupt_convection,
                 "corrupt the convection pairing (mutation hook)")
      ->group("");

  auto* conv = app.add_subcommand("converge", "time-refinement study against the finest level");
  conv->add_option("config", config_path, "JSON config file")->required();
  conv->add_option("--levels", levels, "number of refinement levels (>= 3)");
  conv->add_option("--out", out_dir, "output directory override");

  auto* eigs = app.add_subcommand("eigs", "print eigenvalues and the N_min breakdown");
  eigs->add_option("config", config_path, "JSON config file")->required();
  eigs->add_option("--out", out_dir, "output directory override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, dump_systems);
    if (verify->parsed()) return cmd_verify(config_path, out_dir, corrupt_convection);
    if (conv->parsed()) return cmd_converge(config_path, out_dir, levels);
    if (eigs->parsed()) return cmd_eigs(config_path, out_dir);
  } catch (const plateflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
