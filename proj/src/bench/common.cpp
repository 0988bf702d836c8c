#include <algorithm>
#include <numeric>

#include "bench_internal.hpp"
#include "shapekernel/error.hpp"

namespace shapekernel::bench {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::string> selected_schemes(const ExperimentConfig& cfg, const std::vector<std::string>& supported,
                                          const std::vector<std::string>& defaults) {
  if (cfg.scheme.empty()) return defaults;
  if (std::find(supported.begin(), supported.end(), cfg.scheme) == supported.end()) {
    std::string list;
    for (const auto& s : supported) list += (list.empty() ? "" : ", ") + s;
    throw Error("experiment " + cfg.experiment + " does not support scheme '" + cfg.scheme + "' (supported: " +
                list + ")");
  }
  return {cfg.scheme};
}

EtaConfig eta_config(const ExperimentConfig& cfg, NormKind norm) {
  EtaConfig e;
  e.norm = norm;
  e.n_x = cfg.get<int>("n_x", 50);
  e.n_u = cfg.get<int>("n_u", 20);
  e.seed = cfg.seed;
  e.safety = cfg.eta_safety.value_or(cfg.get<double>("eta_safety", 0.0));
  return e;
}

std::vector<ConicConstraintRecord> scheme_records(const KernelSpec& kernel, const ShapeConstraint& c,
                                                  const std::vector<InputBall>& cover, const std::string& scheme,
                                                  const EtaConfig& eta, int index) {
  if (scheme == "disc") {
    std::vector<Vec> pts;
    for (const auto& b : cover) pts.push_back(b.center);
    return discretize(c, pts, index);
  }
  if (scheme == "ball") {
    EtaEstimator est(kernel, c.op, eta);
    std::vector<double> etas;
    for (const auto& b : cover) etas.push_back(est(b.center, b.radius));
    return tighten_soc(c, cover, etas, index);
  }
  if (scheme == "hyp") {
    if (c.size() != 1) throw Error("scheme hyp needs scalar constraints; " + c.name + " has P = " +
                                   std::to_string(c.size()));
    return tighten_omega(c, omega_cover(kernel, c.op.entry(0, 0), cover, OmegaStyle::ball_halfspace, eta), index);
  }
  throw Error("unknown covering scheme '" + scheme + "'");
}

Json bound_to_json(const BoundReport& b) {
  Json j;
  j["v_app"] = b.v_app;
  j["v_relax"] = b.v_relax ? Json(*b.v_relax) : Json();
  j["gap"] = b.gap ? Json(*b.gap) : Json();
  j["radius_f"] = b.radius_f ? Json(*b.radius_f) : Json();
  j["radius_b"] = b.radius_b ? Json(*b.radius_b) : Json();
  j["apriori"] = b.apriori ? Json(*b.apriori) : Json();
  j["eta_inf"] = b.eta_inf;
  j["fill_distance"] = b.fill_distance;
  j["note"] = b.note;
  return j;
}

Json fit_to_json(const FitResult& f) {
  Json j;
  j["status"] = status_name(f.solution.status);
  j["objective"] = f.fit.objective;
  j["iterations"] = f.solution.iterations;
  j["primal_residual"] = f.solution.primal_residual;
  j["dual_residual"] = f.solution.dual_residual;
  j["atoms"] = f.problem.basis.size();
  j["active"] = f.fit.active.size();
  return j;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

std::vector<Vec> latin_hypercube(int n, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec> pts(n, Vec(dim));
  std::vector<int> perm(n);
  for (int d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) pts[i][d] = (perm[i] + u(rng)) / n;
  }
  return pts;
}

}  // namespace shapekernel::bench
