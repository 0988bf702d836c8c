// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "shapekernel/error.hpp"

using namespace shapekernel;
using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int n, const char* name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  failures += !o.pass;
  std::printf("criterion %2d %s: %s (%.1f s)%s\n", n, name, o.pass ? "PASS" : "FAIL", since(t0), o.detail.str().c_str());
  std::fflush(stdout);
}

double kkt_worst(const ConeProgram& p, const Solution& s) {
  const KktReport r = kkt_residuals(p, s);
  return std::max({r.stationarity, r.primal_feasibility, r.complementarity, r.cone_violation});
}

SdpOperator hessian2() {
  const DiffFunctional dxx = DiffFunctional::partial(MultiIndex{2, 0});
  const DiffFunctional dxy = DiffFunctional::partial(MultiIndex{1, 1});
  const DiffFunctional dyy = DiffFunctional::partial(MultiIndex{0, 2});
  return SdpOperator({{dxx, dxy}, {dxy, dyy}});
}

// central differences of the scalar model, orders 1 and 2
double fd_partial(const Model& m, const MultiIndex& r, const Vec& x) {
  auto f = [&](const Vec& y) { return eval_model(m, y)[0]; };
  std::vector<int> ax;
  for (int i = 0; i < r.dim(); ++i)
    for (int k = 0; k < r[i]; ++k) ax.push_back(i);
  if (ax.size() == 1) {
    const double h = 1e-6;
    Vec p = x, q = x;
    p[ax[0]] += h, q[ax[0]] -= h;
    return (f(p) - f(q)) / (2 * h);
  }
  const double h = 1e-4;
  const int i = ax[0], j = ax[1];
  if (i == j) {
    Vec p = x, q = x;
    p[i] += h, q[i] -= h;
    return (f(p) - 2 * f(x) + f(q)) / (h * h);
  }
  Vec pp = x, pm = x, mp = x, mm = x;
  pp[i] += h, pp[j] += h;
  pm[i] += h, pm[j] -= h;
  mp[i] -= h, mp[j] += h;
  mm[i] -= h, mm[j] -= h;
  return (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
}

struct CatenaryRun {
  double v_app, v_relax;
  FitResult ball;
};

CatenaryRun catenary_at(const ProblemSpec& p, int M) {
  FitResult b = fit(p, fixture::catenary_records(p, M, "ball"));
  const FitResult d = fit(p, fixture::catenary_records(p, M, "disc"));
  if (b.solution.status != SolveStatus::optimal || d.solution.status != SolveStatus::optimal)
    throw Error("catenary solve not optimal at M = " + std::to_string(M));
  return {b.fit.objective, d.fit.objective, std::move(b)};
}

}  // namespace

int main() {
  const ProblemSpec cat = bench::catenary_problem();
  const ShapeConstraint& floor = cat.constraints[0];

  criterion(1, "hard-constraint guarantee", [&](Outcome& o) {
    auto t0 = Clock::now();
    const FitResult r = fit(cat, fixture::catenary_records(cat, 30, "ball"));
    const double cv = verify_pointwise(r.fit.model, floor, 10000).max_violation;
    const double ct = since(t0);
    o.detail << " catenary max violation " << cv << " in " << ct << " s;";
    o.require(r.solution.status == SolveStatus::optimal, "catenary status");
    o.require(cv <= 1e-6, "catenary violation");
    o.require(ct < 30, "catenary runtime");

    t0 = Clock::now();
    bench::ExperimentConfig c;
    c.experiment = "control";
    c.scheme = "ball";
    const bench::ExperimentResult res = bench::run_experiment(c);
    const Model& m = res.models.at(0).second;
    const bench::ControlWalls walls = bench::control_walls(30, c.seed);
    const auto cons = bench::control_constraints(walls);
    double worst = 0.0;
    // 10^4 times on [0,1]; a time on a cell boundary is checked against both cells
    for (int k = 0; k < 10000; ++k) {
      const Vec t = Vec::Constant(1, k / 9999.0);
      for (const auto& ci : cons)
        if (t[0] >= ci.region.lo[0] && t[0] <= ci.region.hi[0])
          worst = std::max(worst, -min_slack(m, ci, t));
    }
    const double tt = since(t0);
    o.detail << " control max violation " << worst << " in " << tt << " s";
    o.require(worst <= 1e-6, "control violation");
    o.require(tt < 30, "control runtime");
  });

  criterion(2, "certificate sandwich", [&](Outcome& o) {
    std::vector<double> gaps;
    for (int M : {30, 60, 120}) {
      const CatenaryRun r = catenary_at(cat, M);
      o.require(r.v_relax <= r.v_app + 1e-7 * (1 + std::abs(r.v_app)), "catenary sandwich at M=" + std::to_string(M));
      gaps.push_back(r.v_app - r.v_relax);
    }
    o.detail << " catenary gaps " << gaps[0] << ", " << gaps[1] << ", " << gaps[2] << ";";
    o.require(gaps[1] < gaps[0] && gaps[2] < gaps[1], "gap shrinks");

    bench::ExperimentConfig c;
    c.experiment = "econ";
    c.params = {{"repetitions", 1}};
    const bench::ExperimentResult res = bench::run_experiment(c);
    int n = 0;
    for (const auto& e : res.summary["certificates"]) {
      const double va = e["v_app"], vr = e["v_relax"];
      o.require(vr <= va + 1e-7 * (1 + std::abs(va)), "econ sandwich " + e["regime"].get<std::string>());
      ++n;
    }
    o.detail << " econ certificates " << n;
    o.require(n > 0, "econ certificates present");
  });

  criterion(3, "omega(ball) equals soc rows", [&](Outcome& o) {
    double worst = 0.0;
    for (int M : {30, 60, 120}) {
      const auto cover = fixture::catenary_cover(M);
      const auto soc = tighten_soc(floor, cover, fixture::etas_for(cat.kernel, floor, cover));
      const auto omg = tighten_omega(floor, omega_cover(cat.kernel, floor.op.entry(0, 0), cover, OmegaStyle::ball));
      const AssembledProblem a = assemble(cat, collect_atoms(cat, soc), soc);
      const AssembledProblem b = assemble(cat, collect_atoms(cat, omg), omg);
      if (a.program.num_rows() != b.program.num_rows() || a.program.num_vars() != b.program.num_vars()) {
        o.require(false, "program shapes differ");
        return;
      }
      worst = std::max(worst, (a.program.dense_coeffs() - b.program.dense_coeffs()).cwiseAbs().maxCoeff());
      for (int i = 0; i < a.program.num_rows(); ++i)
        worst = std::max(worst, std::abs(a.program.row_constant(i) - b.program.row_constant(i)));
    }
    o.detail << " max discrepancy " << worst;
    o.require(worst <= 1e-12, "discrepancy");
  });

  criterion(4, "eta correctness", [&](Outcome& o) {
    struct Case {
      KernelSpec k;
      double delta, quoted;
    };
    const std::vector<Case> cases = {{KernelSpec::gaussian(1, 1.0), 1.0, 0.887142},
                                     {KernelSpec::laplacian(5.0), 0.01, 0.312317}};
    const SdpOperator id = SdpOperator::scalar(DiffFunctional::value(1));
    for (const auto& c : cases) {
      const double s = eta_sampled(c.k, id, Vec::Zero(1), c.delta, NormKind::max, 10000, 1, 7);
      const double a = eta_radial(c.k, c.delta);
      o.detail << " sampled " << s << " radial " << a << ";";
      o.require(std::abs(s - a) <= 2e-3 && std::abs(s - c.quoted) <= 2e-3, "sampled within 2e-3");
      o.require(s <= a + 1e-12, "from below");
    }
    const KernelSpec g = KernelSpec::gaussian(2, 1.0);
    const SdpOperator H = hessian2();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N;
    double margin = 1e300;
    for (int t = 0; t < 20; ++t) {
      const Vec z = (Vec(2) << N(rng), N(rng)).finished();
      const double s = eta_sampled(g, H, z, 0.1, NormKind::max, 200, 20, 100 + t);
      const double e = eta_eigen_bound(g, H, z, 0.1, NormKind::max, 200, 100 + t);
      margin = std::min(margin, e - s);
    }
    o.detail << " min(eigen - sampled) " << margin;
    o.require(margin >= -1e-12, "eigen bound dominates");
  });

  criterion(5, "reproducing derivatives", [&](Outcome& o) {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const std::vector<MultiIndex> orders = {MultiIndex{1, 0}, MultiIndex{0, 1}, MultiIndex{2, 0}, MultiIndex{1, 1},
                                            MultiIndex{0, 2}};
    double worst = 0.0;
    for (int mdl = 0; mdl < 50; ++mdl) {
      const Model m = fixture::random_gaussian_model(2, 12, rng);
      for (int t = 0; t < 10; ++t) {
        const Vec x = (Vec(2) << U(rng), U(rng)).finished();
        for (const auto& r : orders) {
          const double exact = apply(DiffFunctional::partial(r), m, x);
          worst = std::max(worst, std::abs(fd_partial(m, r, x) - exact) / std::max(1.0, std::abs(exact)));
        }
      }
    }
    o.detail << " worst relative error " << worst;
    o.require(worst <= 1e-4, "finite differences");
  });

  criterion(6, "rotated-cone 2x2 encoding", [&](Outcome& o) {
    ShapeConstraint c;
    c.name = "convex";
    c.region = Box{Vec::Zero(2), Vec::Ones(2)};
    c.op = hessian2();
    c.offset = Vec::Zero(2);
    const double eta = 1.0;
    const auto recs = tighten_soc(c, {InputBall{Vec::Constant(2, 0.5), 0.1, NormKind::max}}, {eta});
    ProblemSpec p(KernelSpec::gaussian(2, 1.0));
    p.regularizer.kind = RegularizerKind::norm;
    const AssembledProblem a = assemble(p, collect_atoms(p, recs), recs);
    const ConeBlock& blk = a.program.blocks()[a.record_rows[2].blocks[0]];
    o.require(blk.kind == ConeKind::rsoc && a.basis.size() == 3, "block layout");
    if (!o.pass) return;
    const int t_index = a.norm_var.at(nullptr);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> N;
    int agree = 0, tested = 0;
    for (int s = 0; s < 200; ++s) {
      Mat M(2, 2);
      M(0, 0) = N(rng), M(1, 1) = N(rng), M(0, 1) = M(1, 0) = 0.7 * N(rng);
      const double t = std::abs(N(rng)) * 0.5;
      Vec target(3);
      for (int j = 0; j < 3; ++j) {
        const auto& r = a.basis[j].functional.terms()[0].order;
        target[j] = r[0] == 2 ? M(0, 0) : (r[1] == 2 ? M(1, 1) : M(0, 1));
      }
      Vec x = Vec::Zero(a.program.num_vars());
      x.head(3) = a.eval.fullPivLu().solve(target);
      x[t_index] = t;
      const Vec rows = a.program.row_values(x);
      const Vec v = rows.segment(blk.row_offset, blk.dim);
      const double lam = Eigen::SelfAdjointEigenSolver<Mat>(M - eta * t * Mat::Identity(2, 2)).eigenvalues().minCoeff();
      // within the tolerance band membership is ambiguous either way
      if (std::abs(lam) <= 1e-9) continue;
      const double tol = 1e-9;
      const bool lin = rows[a.program.blocks()[a.record_rows[0].blocks[0]].row_offset] >= -tol &&
                       rows[a.program.blocks()[a.record_rows[1].blocks[0]].row_offset] >= -tol;
      const bool cone = v[0] >= -tol && v[1] >= -tol && 2 * v[0] * v[1] >= v[2] * v[2] - tol;
      agree += (lin && cone) == (lam > 0);
      ++tested;
    }
    o.detail << " agree " << agree << "/" << tested;
    o.require(agree == tested && tested >= 190, "membership agreement");
  });

  criterion(7, "soap-bubble convergence trend", [&](Outcome& o) {
    const double v_relax = bench::catenary_reference(10000).norm();
    const double tol = 1e-3 * (1 + std::abs(v_relax));
    SoapSettings s;
    s.mode = SoapMode::ball;
    s.gamma = 0.8;
    s.delta0 = 0.01;
    s.tol_sat = 1e-8;
    s.k_max = 30;
    const auto t0 = Clock::now();
    const SoapResult r = run_soap(cat, s);
    const double secs = since(t0);
    int reach_k = -1, reach_M = 0;
    double best = 1e300;
    for (const auto& h : r.state.history) {
      const double e = std::abs(h.value - v_relax);
      best = std::min(best, e);
      if (reach_k < 0 && e <= tol) reach_k = h.k, reach_M = h.elements;
    }
    o.detail << " closest |v_k - v_relax| " << best << " (target " << tol << "), final elements "
             << r.state.history.back().elements << ", " << secs << " s;";
    o.require(reach_k >= 0, "accuracy within 30 iterations");
    o.require(secs < 120, "runtime");
    // uniform comparison: smallest doubling M that reaches the same accuracy
    int uniform_M = -1;
    for (int M = 30; M <= 960; M *= 2) {
      const FitResult f = fit(cat, fixture::catenary_records(cat, M, "ball"));
      const double e = std::abs(f.fit.objective - v_relax);
      o.detail << " uniform M=" << M << " error " << e << ";";
      if (e <= tol) {
        uniform_M = M;
        break;
      }
    }
    if (reach_k >= 0)
      o.require(uniform_M < 0 || reach_M < uniform_M, "fewer elements than uniform");
  });

  criterion(8, "a-posteriori bound", [&](Outcome& o) {
    const ProblemSpec sq = bench::catenary_problem({}, true);
    const bench::CatenaryReference ref = bench::catenary_reference(10000);
    const double mu = sq.strong_convexity_f().value_or(0.0);
    o.require(mu == 2.0, "mu_f = 2");
    for (int M : {30, 60, 120}) {
      const CatenaryRun r = catenary_at(sq, M);
      const double radius = std::sqrt(2 * std::max(0.0, r.v_app - r.v_relax) / mu);
      const double dist = ref.distance(r.ball.fit.model);
      o.detail << " M=" << M << " radius " << radius << " distance " << dist << ";";
      o.require(dist <= radius, "bound at M=" + std::to_string(M));
    }
  });

  criterion(9, "robot-arm ordering", [&](Outcome& o) {
    bench::ExperimentConfig c;
    c.experiment = "robotarm";
    const auto t0 = Clock::now();
    const bench::ExperimentResult r = bench::run_experiment(c);
    const double secs = since(t0);
    const Json& s = r.summary["schemes"];
    const double ball = s["ball"]["median_L1_cons"], disc = s["disc"]["median_L1_cons"],
                 none = s["none"]["median_L1_cons"], bv = s["ball"]["max_ball_violation"];
    o.detail << " medians ball " << ball << " disc " << disc << " none " << none << ", ball-region violation " << bv
             << ", d=" << r.summary["dim"] << " M=" << r.summary["M"];
    o.require(r.summary["dim"] == 4 && r.summary["M"] == 16 && r.summary["repetitions"] == 5, "setup");
    o.require(ball <= disc && disc <= none, "ordering");
    o.require(bv <= 1e-6, "ball violation");
    o.require(secs < 300, "runtime");
  });

  criterion(10, "solver correctness", [&](Outcome& o) {
    double err = 0.0, kkt = 0.0;
    {
      ConeProgram p;
      p.add_variables(1, "x");
      p.P(0, 0) = 2.0;
      p.add_block(ConeKind::nonneg, {{{0, 1.0}}}, {-1.0}, "x>=1");
      const Solution s = solve(p);
      o.require(s.status == SolveStatus::optimal, "x>=1 status");
      err = std::max({err, std::abs(s.x[0] - 1.0), std::abs(s.objective - 1.0)});
      kkt = std::max(kkt, kkt_worst(p, s));
    }
    {
      ConeProgram p;
      p.add_variables(1, "t");
      p.q[0] = 1.0;
      p.add_block(ConeKind::soc, {{{0, 1.0}}, {}, {}}, {0.0, 3.0, 4.0}, "norm");
      const Solution s = solve(p);
      o.require(s.status == SolveStatus::optimal, "norm status");
      err = std::max(err, std::abs(s.x[0] - 5.0));
      kkt = std::max(kkt, kkt_worst(p, s));
    }
    {
      ConeProgram p;
      p.add_variables(2, "uv");
      p.q << 1.0, 1.0;
      p.add_block(ConeKind::rsoc, {{{0, 1.0}}, {{1, 1.0}}, {}}, {0.0, 0.0, 3.0}, "2uv>=9");
      const Solution s = solve(p);
      o.require(s.status == SolveStatus::optimal, "rsoc status");
      err = std::max({err, std::abs(s.objective - 3 * std::sqrt(2.0)), std::abs(s.x[0] - 3 / std::sqrt(2.0)),
                      std::abs(s.x[1] - 3 / std::sqrt(2.0))});
      kkt = std::max(kkt, kkt_worst(p, s));
    }
    o.detail << " closed-form error " << err << ", kkt " << kkt << ";";
    o.require(err <= 1e-6, "closed forms");

    // shipped programs: the catenary experiment under every scheme, the squared-norm catenary of the
    // a-posteriori check, control under both schemes
    double ship = 0.0;
    int programs = 0;
    auto check = [&](const FitResult& f, const std::string& what) {
      o.require(f.solution.status == SolveStatus::optimal, what + " status");
      ship = std::max(ship, kkt_worst(f.problem.program, f.solution));
      ++programs;
    };
    for (bool sqn : {false, true}) {
      const ProblemSpec p = bench::catenary_problem({}, sqn);
      for (const char* sch : {"ball", "hyp", "disc"}) {
        if (sqn && std::string(sch) == "hyp") continue;
        for (int M : {30, 60, 120}) check(fit(p, fixture::catenary_records(p, M, sch)), std::string("catenary ") + sch);
      }
    }
    const bench::ControlWalls walls = bench::control_walls(30, 0);
    ProblemSpec cp(bench::control_kernel());
    cp.regularizer.kind = RegularizerKind::norm_squared;
    cp.constraints = bench::control_constraints(walls);
    for (bool ball : {true, false}) {
      std::vector<ConicConstraintRecord> recs;
      EtaEstimator est(cp.kernel, cp.constraints[0].op, EtaConfig{});
      for (int i = 0; i < int(cp.constraints.size()); ++i) {
        const InputBall b{Vec::Constant(1, walls.center(i / 2)), walls.delta(), NormKind::max};
        auto r = ball ? tighten_soc(cp.constraints[i], {b}, {est(b.center, b.radius)}, i)
                      : discretize(cp.constraints[i], {b.center}, i);
        recs.insert(recs.end(), r.begin(), r.end());
      }
      check(fit(cp, recs), ball ? "control ball" : "control disc");
    }
    o.detail << " shipped programs " << programs << " worst kkt " << ship;
    o.require(kkt <= 1e-7 && ship <= 1e-7, "kkt residuals");
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
