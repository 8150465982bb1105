#include "plateflow/sim_config.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "plateflow/errors.hpp"

namespace plateflow {

using nlohmann::json;

Eigen::VectorXd FieldSpec::materialize(const GalerkinBasis& basis) const {
  const PlateGrid& g = basis.grid();
  switch (kind) {
    case Kind::Zero:
      return Eigen::VectorXd();
    case Kind::Coeffs: {
      return basis.nodal(coeffs);
    }
    case Kind::SineBump: {
      Eigen::VectorXd f(g.interior_count());
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          f[g.index(i, j)] =
              scale * std::sin(M_PI * g.x(i) / g.Lx) * std::sin(M_PI * g.y(j) / g.Ly);
      return f;
    }
  }
  return Eigen::VectorXd();
}

namespace {

Eigen::VectorXd to_vector(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

json from_vector(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

FieldSpec parse_field(const json& j, std::vector<std::string>& errors, const std::string& key) {
  FieldSpec f;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "zero")
      f.kind = FieldSpec::Kind::Zero;
    else
      errors.push_back(key + ": unknown field name '" + s + "' (expected \"zero\")");
  } else if (j.is_object()) {
    if (j.contains("coeffs")) {
      f.kind = FieldSpec::Kind::Coeffs;
      f.coeffs = to_vector(j["coeffs"]);
    } else if (j.contains("expr")) {
      if (j["expr"].get<std::string>() == "sine_bump") {
        f.kind = FieldSpec::Kind::SineBump;
        f.scale = j.value("scale", 1.0);
      } else {
        errors.push_back(key + ": unknown expr '" + j["expr"].get<std::string>() + "'");
      }
    } else {
      errors.push_back(key + ": expected {coeffs:[...]} or {expr:\"sine_bump\"}");
    }
  } else {
    errors.push_back(key + ": expected string or object");
  }
  return f;
}

json dump_field(const FieldSpec& f) {
  switch (f.kind) {
    case FieldSpec::Kind::Zero: return "zero";
    case FieldSpec::Kind::Coeffs: return json{{"coeffs", from_vector(f.coeffs)}};
    case FieldSpec::Kind::SineBump: return json{{"expr", "sine_bump"}, {"scale", f.scale}};
  }
  return "zero";
}

PlateModelKind parse_kind(const std::string& s, std::vector<std::string>& errors) {
  if (s == "zero") return PlateModelKind::Zero;
  if (s == "kirchhoff") return PlateModelKind::Kirchhoff;
  if (s == "von_karman") return PlateModelKind::VonKarman;
  if (s == "berger") return PlateModelKind::Berger;
  errors.push_back("plate.model: unknown model '" + s + "'");
  return PlateModelKind::Zero;
}

KirchhoffF parse_f(const std::string& s, std::vector<std::string>& errors) {
  if (s == "linear") return KirchhoffF::Linear;
  if (s == "cubic") return KirchhoffF::Cubic;
  if (s == "sine") return KirchhoffF::Sine;
  errors.push_back("plate.f: unknown built-in '" + s + "' (linear|cubic|sine)");
  return KirchhoffF::Cubic;
}

std::string f_name(KirchhoffF f) {
  switch (f) {
    case KirchhoffF::Linear: return "linear";
    case KirchhoffF::Cubic: return "cubic";
    case KirchhoffF::Sine: return "sine";
  }
  return "cubic";
}

}  // namespace

SimConfig SimConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: invalid JSON: ") + e.what());
  }

  std::vector<std::string> errors;
  SimConfig c;
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    c.geometry.Lx = g.value("Lx", c.geometry.Lx);
    c.geometry.Ly = g.value("Ly", c.geometry.Ly);
    c.geometry.nx = g.value("nx", c.geometry.nx);
    c.geometry.ny = g.value("ny", c.geometry.ny);
    c.geometry.nz = g.value("nz", c.geometry.nz);
  }
  if (j.contains("physics")) c.physics.mu = j["physics"].value("mu", c.physics.mu);
  if (j.contains("plate")) {
    const auto& p = j["plate"];
    c.plate.model = parse_kind(p.value("model", "zero"), errors);
    c.plate.nu = p.value("nu", c.plate.nu);
    c.plate.q = p.value("q", c.plate.q);
    c.plate.r = p.value("r", c.plate.r);
    c.plate.mu = p.value("mu", c.plate.mu);
    if (p.contains("f")) c.plate.f = parse_f(p["f"].get<std::string>(), errors);
    c.plate.f_scale = p.value("f_scale", c.plate.f_scale);
    if (p.contains("gamma_prime")) c.plate.gamma_prime = p["gamma_prime"].get<double>();
    c.plate.berger_nu = p.value("berger_nu", c.plate.berger_nu);
    c.plate.berger_G = p.value("berger_G", c.plate.berger_G);
    if (p.contains("h")) c.plate.h = parse_field(p["h"], errors, "plate.h");
    if (p.contains("F0")) c.plate.F0 = parse_field(p["F0"], errors, "plate.F0");
    if (p.contains("kappa")) c.plate.kappa = p["kappa"].get<double>();
    if (p.contains("C_star")) c.plate.C_star = p["C_star"].get<double>();
    if (p.contains("a")) c.plate.a = p["a"].get<double>();
    if (p.contains("eps")) c.plate.eps = p["eps"].get<double>();
  }
  if (j.contains("run")) {
    const auto& r = j["run"];
    c.run.T = r.value("T", c.run.T);
    c.run.k = r.value("k", c.run.k);
    c.run.N_user = r.value("N_user", c.run.N_user);
    c.run.strict = r.value("strict", c.run.strict);
    c.run.alpha = r.value("alpha", c.run.alpha);
    c.run.j_floor = r.value("j_floor", c.run.j_floor);
    c.run.seed = r.value("seed", c.run.seed);
    if (r.contains("eta0_coeffs")) c.run.eta0_coeffs = to_vector(r["eta0_coeffs"]);
    if (r.contains("v0_coeffs")) c.run.v0_coeffs = to_vector(r["v0_coeffs"]);
    const std::string u0 = r.value("u0", "zero");
    if (u0 == "zero")
      c.run.u0_lift = false;
    else if (u0 == "lift_v0")
      c.run.u0_lift = true;
    else
      errors.push_back("run.u0: expected \"zero\" or \"lift_v0\"");
  }
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    c.tolerances.tol_energy = t.value("tol_energy", c.tolerances.tol_energy);
    c.tolerances.tol_ode = t.value("tol_ode", c.tolerances.tol_ode);
    c.tolerances.tol_solver = t.value("tol_solver", c.tolerances.tol_solver);
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    c.output.dir = o.value("dir", c.output.dir);
    if (o.contains("formats")) c.output.formats = o["formats"].get<std::vector<std::string>>();
    c.output.basis_cache = o.value("basis_cache", c.output.basis_cache);
  }
  if (j.contains("lipschitz")) {
    const auto& l = j["lipschitz"];
    if (l.contains("R")) c.lipschitz.R = l["R"].get<double>();
    c.lipschitz.n_samples = l.value("n_samples", c.lipschitz.n_samples);
  }
  if (!errors.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ParameterError(msg);
  }
  return c;
}

SimConfig SimConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("config: cannot read file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string SimConfig::to_json_text() const {
  json j;
  j["geometry"] = {{"Lx", geometry.Lx}, {"Ly", geometry.Ly}, {"nx", geometry.nx},
                   {"ny", geometry.ny}, {"nz", geometry.nz}};
  j["physics"] = {{"mu", physics.mu}};
  json p;
  p["model"] = to_string(plate.model);
  p["nu"] = plate.nu;
  p["q"] = plate.q;
  p["r"] = plate.r;
  p["mu"] = plate.mu;
  p["f"] = f_name(plate.f);
  p["f_scale"] = plate.f_scale;
  if (plate.gamma_prime) p["gamma_prime"] = *plate.gamma_prime;
  p["berger_nu"] = plate.berger_nu;
  p["berger_G"] = plate.berger_G;
  p["h"] = dump_field(plate.h);
  p["F0"] = dump_field(plate.F0);
  if (plate.kappa) p["kappa"] = *plate.kappa;
  if (plate.C_star) p["C_star"] = *plate.C_star;
  if (plate.a) p["a"] = *plate.a;
  if (plate.eps) p["eps"] = *plate.eps;
  j["plate"] = p;
  j["run"] = {{"T", run.T},           {"k", run.k},
              {"N_user", run.N_user}, {"strict", run.strict},
              {"alpha", run.alpha},   {"j_floor", run.j_floor},
              {"seed", run.seed},     {"eta0_coeffs", from_vector(run.eta0_coeffs)},
              {"v0_coeffs", from_vector(run.v0_coeffs)},
              {"u0", run.u0_lift ? "lift_v0" : "zero"}};
  j["tolerances"] = {{"tol_energy", tolerances.tol_energy},
                     {"tol_ode", tolerances.tol_ode},
                     {"tol_solver", tolerances.tol_solver}};
  j["output"] = {{"dir", output.dir}, {"formats", output.formats}};
  if (!output.basis_cache.empty()) j["output"]["basis_cache"] = output.basis_cache;
  json l;
  if (lipschitz.R) l["R"] = *lipschitz.R;
  l["n_samples"] = lipschitz.n_samples;
  j["lipschitz"] = l;
  return j.dump(2);
}

void SimConfig::validate() const {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  require(geometry.Lx > 0.0, "geometry.Lx must be positive");
  require(geometry.Ly > 0.0, "geometry.Ly must be positive");
  require(geometry.nx >= 4, "geometry.nx must be >= 4");
  require(geometry.ny >= 4, "geometry.ny must be >= 4");
  require(geometry.nz >= 4, "geometry.nz must be >= 4");
  require(physics.mu >= 0.0, "physics.mu must be nonnegative");
  require(run.T > 0.0, "run.T must be positive");
  require(run.k >= 1, "run.k must be >= 1");
  require(geometry.nx >= 4 && geometry.ny >= 4 && run.k <= geometry.nx * geometry.ny,
          "run.k must not exceed nx*ny");
  require(run.N_user >= 1, "run.N_user must be >= 1");
  require(run.alpha > 0.0 && run.alpha < 2.0, "run.alpha must lie in (0,2)");
  require(run.j_floor > 0.0 && run.j_floor < 1.0, "run.j_floor must lie in (0,1)");
  require(run.eta0_coeffs.size() <= run.k, "run.eta0_coeffs longer than k");
  require(run.v0_coeffs.size() <= run.k, "run.v0_coeffs longer than k");
  require(tolerances.tol_energy > 0.0, "tolerances.tol_energy must be positive");
  require(tolerances.tol_ode > 0.0, "tolerances.tol_ode must be positive");
  require(tolerances.tol_solver > 0.0, "tolerances.tol_solver must be positive");
  require(lipschitz.n_samples >= 100, "lipschitz.n_samples must be >= 100");
  if (lipschitz.R) require(*lipschitz.R > 0.0, "lipschitz.R must be positive");
  if (plate.kappa) require(*plate.kappa > 0.0 && *plate.kappa < 0.5,
                           "plate.kappa must lie strictly inside (0,1/2)");
  if (plate.C_star) require(*plate.C_star >= 0.0, "plate.C_star must be nonnegative");
  if (plate.a) require(*plate.a >= 0.0 && *plate.a < 2.0, "plate.a must lie in [0,2)");
  if (plate.eps) require(*plate.eps > 0.0 && *plate.eps <= 2.0, "plate.eps must lie in (0,2]");
  if (plate.model == PlateModelKind::Kirchhoff) {
    require(plate.nu >= 0.0, "plate.nu must be nonnegative");
    require(plate.q > plate.r && plate.r >= 0.0, "plate.q > plate.r >= 0 required");
  }
  if (plate.model == PlateModelKind::Berger)
    require(plate.berger_nu > 0.0, "plate.berger_nu must be positive");
  for (const auto& f : output.formats)
    require(f == "csv" || f == "json" || f == "states" || f == "slices",
            "output.formats: unknown format '" + f + "'");
  if (plate.h.kind == FieldSpec::Kind::Coeffs)
    require(plate.h.coeffs.size() <= run.k, "plate.h.coeffs longer than k");
  if (plate.F0.kind == FieldSpec::Kind::Coeffs)
    require(plate.F0.coeffs.size() <= run.k, "plate.F0.coeffs longer than k");

  if (!errors.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ParameterError(msg);
  }
}

PlateModelConfig SimConfig::model_config(const GalerkinBasis& basis) const {
  PlateModelConfig mc;
  mc.kind = plate.model;
  mc.kappa = plate.kappa;
  mc.C_star = plate.C_star;
  mc.a = plate.a;
  mc.eps = plate.eps;
  mc.seed = run.seed;
  switch (plate.model) {
    case PlateModelKind::Kirchhoff:
      mc.kirchhoff.nu = plate.nu;
      mc.kirchhoff.q = plate.q;
      mc.kirchhoff.r = plate.r;
      mc.kirchhoff.mu = plate.mu;
      mc.kirchhoff.f = plate.f;
      mc.kirchhoff.f_scale = plate.f_scale;
      mc.kirchhoff.gamma_prime = plate.gamma_prime;
      mc.kirchhoff.h = plate.h.materialize(basis);
      break;
    case PlateModelKind::VonKarman:
      mc.von_karman.F0 = plate.F0.materialize(basis);
      mc.von_karman.h = plate.h.materialize(basis);
      break;
    case PlateModelKind::Berger:
      mc.berger.nu = plate.berger_nu;
      mc.berger.G = plate.berger_G;
      mc.berger.h = plate.h.materialize(basis);
      break;
    case PlateModelKind::Zero:
      break;
  }
  return mc;
}

bool SimConfig::has_format(const std::string& f) const {
  for (const auto& s : output.formats)
    if (s == f) return true;
  return false;
}

}  // namespace plateflow
