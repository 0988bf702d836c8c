#include <algorithm>
#include <cmath>

#include "bench_internal.hpp"
#include "shapekernel/error.hpp"

namespace shapekernel::bench {

int ControlWalls::cell_of(double t) const {
  const int m = int(std::floor(t / (2.0 * delta())));
  return std::clamp(m, 0, cells() - 1);
}

ControlWalls control_walls(int cells, std::uint64_t seed, const WallParams& wp) {
  if (cells < 1) throw Error("control walls need at least one cell");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, wp.amplitude);
  std::vector<double> alpha(wp.centers), beta(wp.centers);
  for (auto& a : alpha) a = N(rng);
  for (auto& b : beta) b = N(rng) / wp.amplitude;  // unit weights for the modulation
  const auto tau = linspace(0.0, 1.0, wp.centers);
  auto expand = [&](const std::vector<double>& w, double t) {
    double s = 0.0;
    for (int k = 0; k < wp.centers; ++k) {
      const double u = (t - tau[k]) / wp.bandwidth;
      s += w[k] * std::exp(-0.5 * u * u);
    }
    return s;
  };
  ControlWalls w;
  w.lower.resize(cells);
  w.upper.resize(cells);
  const double c0 = expand(alpha, 0.0);
  for (int m = 0; m < cells; ++m) {
    const double t = w.center(m);
    const double mid = expand(alpha, t) - c0;
    const double h = wp.half_width + wp.modulation * std::abs(expand(beta, t));
    w.lower[m] = mid - h;
    w.upper[m] = mid + h;
  }
  return w;
}

KernelSpec control_kernel() {
  Mat A(2, 2), B(2, 1);
  A << 0, 1, 0, -1;
  B << 0, 1;
  return KernelSpec::lti_control(A, B);
}

std::vector<ShapeConstraint> control_constraints(const ControlWalls& w) {
  std::vector<ShapeConstraint> out;
  for (int m = 0; m < w.cells(); ++m) {
    const Box cell{Vec::Constant(1, 2 * m * w.delta()), Vec::Constant(1, 2 * (m + 1) * w.delta())};
    ShapeConstraint lo;
    lo.name = "floor_" + std::to_string(m);
    lo.region = cell;
    lo.op = SdpOperator::scalar(DiffFunctional::value(1, 0));
    lo.offset = Vec::Constant(1, w.lower[m]);
    ShapeConstraint up = lo;
    up.name = "ceiling_" + std::to_string(m);
    up.op = SdpOperator::scalar(DiffFunctional::value(1, 0, -1.0));
    up.offset = Vec::Constant(1, -w.upper[m]);
    out.push_back(lo);
    out.push_back(up);
  }
  return out;
}

namespace {

WallParams wall_params(const ExperimentConfig& cfg) {
  WallParams wp;
  wp.centers = cfg.get<int>("wall_centers", wp.centers);
  wp.bandwidth = cfg.get<double>("wall_bandwidth", wp.bandwidth);
  wp.amplitude = cfg.get<double>("wall_amplitude", wp.amplitude);
  wp.half_width = cfg.get<double>("wall_half_width", wp.half_width);
  wp.modulation = cfg.get<double>("wall_modulation", wp.modulation);
  return wp;
}

ControlWalls walls_for(const ExperimentConfig& cfg) {
  return control_walls(cfg.get<int>("cells", 30), cfg.seed, wall_params(cfg));
}

int per_cell_grid(const ExperimentConfig& cfg, int cells) {
  const int total = cfg.grid_res.value_or(10000);
  return std::max(2, (total + cells - 1) / cells + 1);
}

}  // namespace

VerifyTarget control_verify_target(const ExperimentConfig& cfg) {
  const auto w = walls_for(cfg);
  VerifyTarget v;
  v.constraints = control_constraints(w);
  v.grid_res = per_cell_grid(cfg, w.cells());
  return v;
}

ExperimentResult run_control(const ExperimentConfig& cfg) {
  const auto schemes = selected_schemes(cfg, {"ball", "disc", "none"}, {"ball", "disc"});
  const ControlWalls walls = walls_for(cfg);
  const KernelSpec kernel = control_kernel();
  const EtaConfig eta = eta_config(cfg, NormKind::max);
  const int cell_grid = per_cell_grid(cfg, walls.cells());
  const int plot_points = cfg.get<int>("plot_points", 501);

  ProblemSpec p(kernel);
  p.regularizer.kind = RegularizerKind::norm_squared;
  p.constraints = control_constraints(walls);

  ExperimentResult res;
  CsvTable wall_table({"cell", "t_lo", "t_hi", "lower", "upper", "eta"});
  std::vector<double> etas(walls.cells());
  {
    EtaEstimator est(kernel, p.constraints[0].op, eta);
    for (int m = 0; m < walls.cells(); ++m) {
      etas[m] = est(Vec::Constant(1, walls.center(m)), walls.delta());
      wall_table.add_numbers({double(m), 2 * m * walls.delta(), 2 * (m + 1) * walls.delta(), walls.lower[m],
                              walls.upper[m], etas[m]});
    }
  }
  res.tables["walls.csv"] = wall_table;

  CsvTable viol_table({"scheme", "norm", "max_violation", "violated_cells", "points", "status"});
  CsvTable timing({"scheme", "seconds"});
  Json per = Json::object();
  for (const auto& scheme : schemes) {
    std::vector<ConicConstraintRecord> recs;
    if (scheme != "none")
      for (size_t i = 0; i < p.constraints.size(); ++i) {
        const auto& c = p.constraints[i];
        const std::vector<InputBall> cover = {InputBall{Vec::Constant(1, walls.center(int(i) / 2)), walls.delta(),
                                                        NormKind::max}};
        auto r = scheme == "disc" ? discretize(c, {cover[0].center}, int(i))
                                  : tighten_soc(c, cover, {etas[i / 2]}, int(i));
        recs.insert(recs.end(), r.begin(), r.end());
      }
    const auto t0 = Clock::now();
    FitResult f = fit(p, recs, cfg.solver);
    const double secs = seconds_since(t0);
    const Model& m = f.fit.model;
    double worst = 0.0;
    long points = 0;
    std::vector<char> hit(walls.cells(), 0);
    for (size_t i = 0; i < p.constraints.size(); ++i) {
      const auto rep = verify_pointwise(m, p.constraints[i], cell_grid);
      points += rep.points;
      worst = std::max(worst, rep.max_violation);
      if (rep.max_violation > 1e-6) hit[i / 2] = 1;
    }
    const int violated = int(std::count(hit.begin(), hit.end(), 1));
    viol_table.add_row({scheme, csv_number(m.norm()), csv_number(worst), std::to_string(violated),
                        std::to_string(points), status_name(f.solution.status)});
    timing.add_row({scheme, csv_number(secs)});
    CsvTable traj({"t", "z", "zdot", "lower", "upper", "lower_buffered", "upper_buffered"});
    for (double t : linspace(0.0, 1.0, plot_points)) {
      const Vec z = eval_model(m, Vec::Constant(1, t));
      const int c = walls.cell_of(t);
      const double buf = scheme == "ball" ? etas[c] * m.norm() : 0.0;
      traj.add_numbers({t, z[0], z[1], walls.lower[c], walls.upper[c], walls.lower[c] + buf, walls.upper[c] - buf});
    }
    res.tables["trajectory_" + scheme + ".csv"] = traj;
    res.models.emplace_back(scheme, m);
    Json js;
    js["fit"] = fit_to_json(f);
    js["norm"] = m.norm();
    js["max_violation"] = worst;
    js["violated_cells"] = violated;
    js["points"] = points;
    js["seconds"] = secs;
    per[scheme] = js;
  }
  res.tables["violations.csv"] = viol_table;
  res.timing_tables["timing.csv"] = timing;
  res.summary["cells"] = walls.cells();
  res.summary["delta"] = walls.delta();
  res.summary["wall_params"] = config_to_json(cfg)["params"];
  res.summary["schemes"] = per;
  return res;
}

}  // namespace shapekernel::bench
