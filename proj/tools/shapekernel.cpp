#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "shapekernel/bench.hpp"
#include "shapekernel/error.hpp"

using namespace shapekernel;

int main(int argc, char** argv) {
  CLI::App app{"shape-constrained kernel regression experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  std::string experiment, config_path, out_dir, scheme;
  std::uint64_t seed = 0;
  double eta_safety = 0.0;
  int grid_res = 0;
  run->add_option("experiment", experiment, "catenary, control, robotarm, econ")->required();
  run->add_option("--config", config_path, "JSON config");
  run->add_option("--out", out_dir, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "random seed");
  run->add_option("--scheme", scheme, "covering scheme")
      ->check(CLI::IsMember({"ball", "hyp", "soap-ball", "soap-hyp", "disc", "none"}));
  auto* eta_opt = run->add_option("--eta-safety", eta_safety, "relative inflation of sampled eta values")
                      ->check(CLI::NonNegativeNumber);
  auto* grid_opt = run->add_option("--grid-res", grid_res, "verification grid points per axis")
                       ->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "re-check a saved model on a dense grid");
  std::string model_path, verify_config;
  verify->add_option("--model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
  verify->add_option("--config", verify_config, "experiment JSON config, or the summary.json of the run")->required()->check(CLI::ExistingFile);
  double verify_tol = 1e-6;
  verify->add_option("--tol", verify_tol, "allowed violation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      Json j = config_path.empty() ? Json::object() : read_json_file(config_path);
      if (j.contains("experiment") && j["experiment"] != experiment)
        throw Error("config is for experiment " + j["experiment"].get<std::string>() + ", not " + experiment);
      j["experiment"] = experiment;
      if (*seed_opt) j["seed"] = seed;
      if (!scheme.empty()) j["scheme"] = scheme;
      if (*eta_opt) j["eta_safety"] = eta_safety;
      if (*grid_opt) j["grid_res"] = grid_res;
      auto cfg = bench::config_from_json(j);
      cfg.out_dir = out_dir;
      const auto result = bench::run_experiment(cfg);
      bench::emit_results(result, out_dir);
      std::printf("wrote %s (%.1f s)\n", out_dir.c_str(), result.summary["seconds"].get<double>());
      return 0;
    }
    Json vj = read_json_file(verify_config);
    // a run's summary.json carries the effective config, seed and overrides included
    if (vj.contains("config") && vj["config"].is_object()) vj = vj["config"];
    const auto cfg = bench::config_from_json(vj);
    const Model model = load_model(model_path);
    const auto target = bench::verify_target(cfg);
    bool ok = true;
    for (const auto& c : target.constraints) {
      const auto rep = verify_pointwise(model, c, target.grid_res);
      const bool pass = rep.max_violation <= verify_tol;
      ok = ok && pass;
      std::printf("%-12s points %ld  max violation %.3e  %s\n", c.name.c_str(), rep.points, rep.max_violation,
                  pass ? "ok" : "VIOLATED");
    }
    return ok ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
