#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "bench_internal.hpp"
#include "shapekernel/error.hpp"

namespace shapekernel::bench {

ProblemSpec catenary_problem(const CatenaryConfig& c, bool squared_norm) {
  ProblemSpec p(KernelSpec::laplacian(c.rate));
  p.regularizer.kind = squared_norm ? RegularizerKind::norm_squared : RegularizerKind::norm;
  p.regularizer.weight = 1.0;
  const double xs[3] = {0.0, 0.5, 1.0}, ys[3] = {0.0, 1.5, 0.0};
  for (int i = 0; i < 3; ++i)
    p.equalities.push_back(Interpolation{Atom{Vec::Constant(1, xs[i]), DiffFunctional::value(1)}, ys[i], Vec()});
  ShapeConstraint floor;
  floor.name = "floor";
  floor.region = Box{Vec::Constant(1, c.lo), Vec::Constant(1, c.hi)};
  floor.op = SdpOperator::scalar(DiffFunctional::value(1));
  floor.offset = Vec::Constant(1, c.floor);
  p.constraints.push_back(floor);
  return p;
}

double CatenaryReference::eval(double x) const {
  const size_t n = knots.size();
  if (x <= knots.front()) return values.front() * std::exp(-rate * (knots.front() - x));
  if (x >= knots.back()) return values.back() * std::exp(-rate * (x - knots.back()));
  const size_t k = std::upper_bound(knots.begin(), knots.end(), x) - knots.begin() - 1;
  if (k + 1 >= n) return values.back();
  const double a = knots[k], b = knots[k + 1];
  const double sh = std::sinh(rate * (b - a));
  return (values[k] * std::sinh(rate * (b - x)) + values[k + 1] * std::sinh(rate * (x - a))) / sh;
}

double CatenaryReference::distance(const Model& m) const {
  double cross = 0.0;
  for (size_t j = 0; j < m.basis().size(); ++j) {
    const Atom& a = m.basis()[j];
    for (const auto& t : a.functional.terms()) {
      if (t.order.order() != 0) throw Error("reference distance needs value atoms");
      cross += m.coeffs()[j] * t.coeff * eval(a.point[0]);
    }
  }
  return std::sqrt(std::max(0.0, m.norm() * m.norm() + norm_sq - 2.0 * cross));
}

CatenaryReference catenary_reference(int grid_points, const CatenaryConfig& c) {
  if (grid_points < 2) throw Error("reference grid needs at least two points");
  struct Knot {
    double x;
    int kind;  // 0 free, 1 bounded, 2 fixed
    double value;
  };
  std::vector<Knot> ks = {{0.0, 2, 0.0}, {0.5, 2, 1.5}, {1.0, 2, 0.0}};
  for (int i = 0; i < grid_points; ++i) {
    const double x = c.lo + (c.hi - c.lo) * i / (grid_points - 1);
    if (std::abs(x - 0.5) < 1e-14) continue;
    ks.push_back({x, 1, c.floor});
  }
  std::sort(ks.begin(), ks.end(), [](const Knot& a, const Knot& b) { return a.x < b.x; });
  const int n = int(ks.size());
  const double lam = c.rate;
  // H = tridiagonal Hessian of the norm squared in knot values
  std::vector<double> diag(n, 0.0), off(n - 1, 0.0);
  diag[0] += 1.0;
  diag[n - 1] += 1.0;
  for (int k = 0; k + 1 < n; ++k) {
    const double h = ks[k + 1].x - ks[k].x;
    const double ch = 1.0 / std::tanh(lam * h), cs = 1.0 / std::sinh(lam * h);
    diag[k] += ch;
    diag[k + 1] += ch;
    off[k] = -cs;
  }
  std::vector<double> u(n, 0.0);
  // primal active set: add the most violated bound, drop negative multipliers; the solution
  // touches the floor at few knots so this takes a handful of O(n) solves
  std::vector<char> active(n, 0);
  for (int k = 0; k < n; ++k)
    if (ks[k].kind == 2) u[k] = ks[k].value;

  CatenaryReference ref;
  ref.rate = lam;
  std::vector<double> cp(n), dp(n);
  auto hu = [&](int k) {
    double v = diag[k] * u[k];
    if (k > 0) v += off[k - 1] * u[k - 1];
    if (k + 1 < n) v += off[k] * u[k + 1];
    return v;
  };
  bool done = false;
  for (int it = 0; it < 2 * n + 10 && !done; ++it) {
    ref.iterations = it + 1;
    for (int k = 0; k < n; ++k)
      if (active[k]) u[k] = ks[k].value;
    std::vector<int> freev;
    for (int k = 0; k < n; ++k)
      if (ks[k].kind != 2 && !active[k]) freev.push_back(k);
    const int m = int(freev.size());
    for (int i = 0; i < m; ++i) {
      const int k = freev[i];
      double rhs = 0.0;
      if (k > 0 && (ks[k - 1].kind == 2 || active[k - 1])) rhs -= off[k - 1] * u[k - 1];
      if (k + 1 < n && (ks[k + 1].kind == 2 || active[k + 1])) rhs -= off[k] * u[k + 1];
      const double lower = (i > 0 && freev[i - 1] == k - 1) ? off[k - 1] : 0.0;
      const double upper = (i + 1 < m && freev[i + 1] == k + 1) ? off[k] : 0.0;
      const double den = diag[k] - (i > 0 ? lower * cp[i - 1] : 0.0);
      cp[i] = upper / den;
      dp[i] = (rhs - (i > 0 ? lower * dp[i - 1] : 0.0)) / den;
    }
    for (int i = m - 1; i >= 0; --i) u[freev[i]] = dp[i] - (i + 1 < m ? cp[i] * u[freev[i + 1]] : 0.0);
    int drop = -1, add = -1;
    double worst_mu = 0.0, worst_gap = -1e-13;
    for (int k = 0; k < n; ++k) {
      if (ks[k].kind != 1) continue;
      if (active[k]) {
        const double mu = hu(k);
        if (mu < worst_mu) worst_mu = mu, drop = k;
      } else if (u[k] - ks[k].value < worst_gap) {
        worst_gap = u[k] - ks[k].value;
        add = k;
      }
    }
    if (drop >= 0)
      active[drop] = 0;
    else if (add >= 0)
      active[add] = 1;
    else
      done = true;
  }
  if (!done) throw Error("catenary reference active set did not settle");
  double e = 0.5 * u[0] * u[0] + 0.5 * u[n - 1] * u[n - 1];
  for (int k = 0; k + 1 < n; ++k) {
    const double h = ks[k + 1].x - ks[k].x;
    // (u^2 + v^2) coth - 2uv csch without the cancellation for small h
    const double d = u[k] - u[k + 1];
    e += 0.5 * (d * d / std::tanh(lam * h) + 2.0 * u[k] * u[k + 1] * std::tanh(0.5 * lam * h));
  }
  ref.norm_sq = e;
  for (int k = 0; k < n; ++k) {
    ref.knots.push_back(ks[k].x);
    ref.values.push_back(u[k]);
    ref.active += active[k];
  }
  return ref;
}

namespace {

CatenaryConfig catenary_config(const ExperimentConfig& cfg) {
  CatenaryConfig c;
  c.rate = cfg.get<double>("rate", c.rate);
  c.floor = cfg.get<double>("floor", c.floor);
  c.lo = cfg.get<double>("lo", c.lo);
  c.hi = cfg.get<double>("hi", c.hi);
  return c;
}

CsvTable solution_table(const Model& m, int n) {
  CsvTable t({"x", "f"});
  for (double x : linspace(0.0, 1.0, n)) t.add_numbers({x, eval_model(m, Vec::Constant(1, x))[0]});
  return t;
}

}  // namespace

VerifyTarget catenary_verify_target(const ExperimentConfig& cfg) {
  VerifyTarget v;
  v.constraints = catenary_problem(catenary_config(cfg)).constraints;
  v.grid_res = cfg.grid_res.value_or(10000);
  return v;
}

ExperimentResult run_catenary(const ExperimentConfig& cfg) {
  const CatenaryConfig cc = catenary_config(cfg);
  const auto schemes = selected_schemes(cfg, {"ball", "hyp", "disc", "soap-ball", "soap-hyp", "none"},
                                        {"ball", "hyp", "disc", "soap-ball", "soap-hyp"});
  const auto Ms = cfg.get<std::vector<int>>("M", {30, 60, 120});
  const int grid_res = cfg.grid_res.value_or(10000);
  const int ref_grid = cfg.get<int>("reference_grid", 10000);
  const int plot_points = cfg.get<int>("plot_points", 201);
  const EtaConfig eta = eta_config(cfg, NormKind::max);

  ExperimentResult res;
  const ProblemSpec p = catenary_problem(cc);
  const ShapeConstraint& floor = p.constraints[0];
  const CatenaryReference ref = catenary_reference(ref_grid, cc);

  Json summary;
  summary["reference"] = {{"grid", ref_grid}, {"value", ref.norm()}, {"active_knots", ref.active}};
  CsvTable conv({"scheme", "M", "v_app", "v_relax", "gap", "value_error", "distance_to_reference",
                 "max_violation", "status"});
  CsvTable timing({"scheme", "M", "seconds", "value_error"});
  CsvTable ref_table({"x", "f"});
  for (double x : linspace(0.0, 1.0, plot_points)) ref_table.add_numbers({x, ref.eval(x)});
  res.tables["solution_reference.csv"] = ref_table;

  // the discretized relaxation at each M is the lower certificate for every uniform scheme
  std::map<int, double> v_relax;
  std::map<int, FitResult> disc_fit;
  std::map<int, double> disc_secs;
  auto relax = [&](int M) {
    if (!v_relax.count(M)) {
      const auto cover = cover_box_counts(floor.region, {M}, NormKind::max);
      const auto t0 = Clock::now();
      auto f = fit(p, scheme_records(p.kernel, floor, cover, "disc", eta, 0), cfg.solver);
      disc_secs[M] = seconds_since(t0);
      v_relax[M] = f.fit.objective;
      disc_fit.emplace(M, std::move(f));
    }
    return v_relax[M];
  };

  Json per_scheme = Json::object();
  for (const auto& scheme : schemes) {
    Json js;
    if (scheme == "none") {
      ProblemSpec free = p;
      free.constraints.clear();
      const auto t0 = Clock::now();
      auto f = fit(free, {}, cfg.solver);
      const double secs = seconds_since(t0);
      const auto viol = verify_pointwise(f.fit.model, floor, grid_res);
      js["fit"] = fit_to_json(f);
      js["max_violation"] = viol.max_violation;
      js["v_app"] = f.fit.objective;
      conv.add_row({scheme, "0", csv_number(f.fit.objective), "", "", csv_number(std::abs(f.fit.objective - ref.norm())),
                    csv_number(ref.distance(f.fit.model)), csv_number(viol.max_violation),
                    status_name(f.solution.status)});
      timing.add_row({scheme, "0", csv_number(secs), csv_number(std::abs(f.fit.objective - ref.norm()))});
      res.tables["solution_none.csv"] = solution_table(f.fit.model, plot_points);
      res.models.emplace_back("none", f.fit.model);
    } else if (scheme == "ball" || scheme == "hyp" || scheme == "disc") {
      Json rows = Json::array();
      for (int M : Ms) {
        const auto cover = cover_box_counts(floor.region, {M}, NormKind::max);
        const auto t0 = Clock::now();
        FitResult f = scheme == "disc" ? (relax(M), disc_fit.at(M))
                                       : fit(p, scheme_records(p.kernel, floor, cover, scheme, eta, 0), cfg.solver);
        const double secs = scheme == "disc" ? disc_secs.at(M) : seconds_since(t0);
        const double vr = relax(M);
        const auto viol = verify_pointwise(f.fit.model, floor, grid_res);
        BoundInputs bi;
        bi.v_app = f.fit.objective;
        bi.v_relax = vr;
        double eta_inf = 0.0;
        if (scheme != "disc")
          for (const auto& b : cover) eta_inf = std::max(eta_inf, eta_radial(p.kernel, b.radius));
        bi.eta_inf = eta_inf;
        std::vector<Vec> anchors;
        for (const auto& b : cover) anchors.push_back(b.center);
        bi.fill_distance = fill_distance(anchors, floor.region, grid_res);
        const BoundReport br = compute_bounds(bi);
        const double err = std::abs(f.fit.objective - ref.norm());
        conv.add_row({scheme, std::to_string(M), csv_number(f.fit.objective), csv_number(vr), csv_number(*br.gap),
                      csv_number(err), csv_number(ref.distance(f.fit.model)), csv_number(viol.max_violation),
                      status_name(f.solution.status)});
        timing.add_row({scheme, std::to_string(M), csv_number(secs), csv_number(err)});
        Json row = bound_to_json(br);
        row["M"] = M;
        row["max_violation"] = viol.max_violation;
        row["fit"] = fit_to_json(f);
        rows.push_back(row);
        if (M == Ms.back()) {
          res.tables["solution_" + scheme + ".csv"] = solution_table(f.fit.model, plot_points);
          res.models.emplace_back(scheme, f.fit.model);
          js["v_app"] = br.v_app;
          js["v_relax"] = vr;
          js["gap"] = *br.gap;
        }
      }
      js["runs"] = rows;
    } else {
      SoapSettings s;
      s.mode = scheme == "soap-ball" ? SoapMode::ball : SoapMode::omega;
      s.gamma = cfg.get<double>("gamma", s.gamma);
      s.k_max = cfg.get<int>("k_max", s.k_max);
      s.delta0 = cfg.get<double>("delta0", s.delta0);
      s.tol_sat = cfg.get<double>("tol_sat", s.tol_sat);
      s.eta = eta;
      s.solver = cfg.solver;
      const auto t0 = Clock::now();
      const SoapResult r = run_soap(p, s);
      const double secs = seconds_since(t0);
      const auto viol = verify_pointwise(r.model, floor, grid_res);
      const int M = r.state.history.back().elements;
      const double v = r.state.history.back().value;
      // relaxation at the final anchors
      std::vector<Vec> anchors;
      for (const auto& e : r.state.coverings[0]) anchors.push_back(e.ball.center);
      const double vr = fit(p, discretize(floor, anchors, 0), cfg.solver).fit.objective;
      const double err = std::abs(v - ref.norm());
      conv.add_row({scheme, std::to_string(M), csv_number(v), csv_number(vr), csv_number(std::max(0.0, v - vr)),
                    csv_number(err), csv_number(ref.distance(r.model)), csv_number(viol.max_violation),
                    status_name(r.last.solution.status)});
      timing.add_row({scheme, std::to_string(M), csv_number(secs), csv_number(err)});
      CsvTable hist({"k", "M", "v", "bursts", "maxEta", "value_error"});
      CsvTable hist_t({"k", "M", "v", "wallTime"});
      for (const auto& h : r.state.history) {
        hist.add_numbers({double(h.k), double(h.elements), h.value, double(h.bursts), h.max_eta,
                          std::abs(h.value - ref.norm())});
        hist_t.add_numbers({double(h.k), double(h.elements), h.value, h.wall_time});
      }
      res.tables["history_" + scheme + ".csv"] = hist;
      res.timing_tables["timing_history_" + scheme + ".csv"] = hist_t;
      res.tables["solution_" + scheme + ".csv"] = solution_table(r.model, plot_points);
      res.models.emplace_back(scheme, r.model);
      js["v_app"] = v;
      js["v_relax"] = vr;
      js["gap"] = std::max(0.0, v - vr);
      js["iterations"] = r.state.k;
      js["elements"] = M;
      js["nonmonotone_events"] = r.state.nonmonotone_events;
      js["max_violation"] = viol.max_violation;
    }
    per_scheme[scheme] = js;
  }
  summary["schemes"] = per_scheme;
  res.summary = summary;
  res.tables["convergence.csv"] = conv;
  res.timing_tables["timing.csv"] = timing;
  return res;
}

}  // namespace shapekernel::bench
