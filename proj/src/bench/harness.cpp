#include <filesystem>

#include "bench_internal.hpp"
#include "shapekernel/error.hpp"

namespace shapekernel::bench {

namespace {

const char* const kExperiments[] = {"catenary", "control", "robotarm", "econ", "custom"};

SolverSettings solver_from_json(const Json& j) {
  SolverSettings s;
  s.max_iter = j.value("max_iter", s.max_iter);
  s.feas_tol = j.value("feas_tol", s.feas_tol);
  s.gap_tol = j.value("gap_tol", s.gap_tol);
  s.step_fraction = j.value("step_fraction", s.step_fraction);
  s.polish_iter = j.value("polish_iter", s.polish_iter);
  return s;
}

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  ExperimentConfig c;
  c.experiment = j.value("experiment", std::string());
  bool known = false;
  for (const char* e : kExperiments) known = known || c.experiment == e;
  if (!known) throw Error("config: unknown or missing experiment '" + c.experiment + "'");
  c.seed = j.value("seed", std::uint64_t(0));
  c.out_dir = j.value("out_dir", std::string());
  c.scheme = j.value("scheme", std::string());
  if (j.contains("eta_safety")) c.eta_safety = j["eta_safety"].get<double>();
  if (j.contains("grid_res")) c.grid_res = j["grid_res"].get<int>();
  if (j.contains("solver")) c.solver = solver_from_json(j["solver"]);
  // everything else is an experiment parameter; a nested "params" object is merged on top
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const char* const reserved[] = {"experiment", "seed", "out_dir", "scheme", "eta_safety",
                                           "grid_res", "solver", "params"};
    bool r = false;
    for (const char* k : reserved) r = r || it.key() == k;
    if (!r) c.params[it.key()] = it.value();
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw Error("config: params must be an object");
    for (auto it = j["params"].begin(); it != j["params"].end(); ++it) c.params[it.key()] = it.value();
  }
  if (c.grid_res && *c.grid_res < 2) throw Error("config: grid_res must be at least 2");
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  if (!c.out_dir.empty()) j["out_dir"] = c.out_dir;
  if (!c.scheme.empty()) j["scheme"] = c.scheme;
  if (c.eta_safety) j["eta_safety"] = *c.eta_safety;
  if (c.grid_res) j["grid_res"] = *c.grid_res;
  j["solver"] = {{"max_iter", c.solver.max_iter},
                 {"feas_tol", c.solver.feas_tol},
                 {"gap_tol", c.solver.gap_tol},
                 {"step_fraction", c.solver.step_fraction},
                 {"polish_iter", c.solver.polish_iter}};
  j["params"] = c.params;
  return j;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentResult r;
  if (cfg.experiment == "catenary")
    r = run_catenary(cfg);
  else if (cfg.experiment == "control")
    r = run_control(cfg);
  else if (cfg.experiment == "robotarm")
    r = run_robotarm(cfg);
  else if (cfg.experiment == "econ")
    r = run_econ(cfg);
  else
    throw Error("experiment '" + cfg.experiment + "' has no built-in runner; use the library API for custom problems");
  r.summary["experiment"] = cfg.experiment;
  r.summary["config"] = config_to_json(cfg);
  r.summary["seconds"] = seconds_since(t0);
  return r;
}

void emit_results(const ExperimentResult& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw Error("cannot create output directory " + out_dir);
  const fs::path dir(out_dir);
  write_text_file((dir / "summary.json").string(), r.summary.dump(2) + "\n");
  for (const auto& [name, t] : r.tables) t.write((dir / name).string());
  for (const auto& [name, t] : r.timing_tables) t.write((dir / name).string());
  for (const auto& [name, m] : r.models) save_model((dir / ("model_" + name + ".json")).string(), m);
}

VerifyTarget verify_target(const ExperimentConfig& cfg) {
  if (cfg.experiment == "catenary") return catenary_verify_target(cfg);
  if (cfg.experiment == "control") return control_verify_target(cfg);
  throw Error("verify supports the catenary and control experiments (got " + cfg.experiment + ")");
}

}  // namespace shapekernel::bench
