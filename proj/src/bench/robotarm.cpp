#include <algorithm>
#include <cmath>
#include <numbers>

#include "bench_internal.hpp"
#include "shapekernel/error.hpp"

namespace shapekernel::bench {

namespace {

double cumulative_angle(const Vec& x, int segments, int upto) {
  double s = 0.0;
  for (int j = 0; j <= upto; ++j) s += x[segments + j];
  return 2.0 * std::numbers::pi * s;
}

}  // namespace

Vec RobotArm::pose(const Vec& x) const {
  if (x.size() != dim()) throw Error("robot arm: input has wrong dimension");
  Vec y = Vec::Zero(3);
  for (int i = 0; i < segments; ++i) {
    const double a = cumulative_angle(x, segments, i);
    y[0] += x[i] * std::cos(a);
    y[1] += x[i] * std::sin(a);
  }
  y[2] = std::sin(cumulative_angle(x, segments, segments - 1));
  return y;
}

double RobotArm::coefficient(const Vec& x, int i, int l) const {
  const double a = cumulative_angle(x, segments, i);
  return l == 0 ? std::cos(a) : std::sin(a);
}

Dataset synth_robot_data(const RobotArm& arm, int n, double noise, std::uint64_t seed) {
  if (arm.segments < 1) throw Error("robot arm needs at least one segment");
  if (n < 1) throw Error("robot arm data needs at least one sample");
  std::mt19937_64 rng(seed);
  const auto X = latin_hypercube(n, arm.dim(), rng);
  std::normal_distribution<double> N(0.0, noise);
  Dataset d;
  d.X.resize(n, arm.dim());
  d.Y.resize(n, 3);
  for (int k = 0; k < n; ++k) {
    d.X.row(k) = X[k].transpose();
    const Vec y = arm.pose(X[k]);
    for (int l = 0; l < 3; ++l) d.Y(k, l) = y[l] + (noise > 0 ? N(rng) : 0.0);
  }
  d.prep.synthetic = true;
  d.prep.raw_rows = n;
  return d;
}

Mat robot_output_covariance(const RobotArm& arm, int samples, std::uint64_t seed) {
  if (samples < 2) throw Error("covariance needs at least two samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Mat Y(samples, 3);
  for (int k = 0; k < samples; ++k) {
    Vec x(arm.dim());
    for (int i = 0; i < arm.dim(); ++i) x[i] = U(rng);
    Y.row(k) = arm.pose(x).transpose();
  }
  const Mat c = Y.rowwise() - Y.colwise().mean();
  return c.transpose() * c / double(samples - 1);
}

namespace {

struct Hyper {
  double sigma_len = 1.0;  // shared by the length inputs
  double sigma = 0.5;      // shared by the angle inputs
  double lambda = 1e-2;
  double cv_mse = 0.0;
};

// min (1/n) sum |y - f(x)|^2 + lambda |f|^2 in closed form: alpha = (K + n lambda I)^{-1} y
Mat ridge_predict(const KernelSpec& k, const Mat& Xtr, const Mat& Ytr, const Mat& Xte, double lambda) {
  const int n = int(Xtr.rows()), Q = int(Ytr.cols());
  Mat K(n * Q, n * Q);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) K.block(a * Q, b * Q, Q, Q) = k.eval(Xtr.row(a).transpose(), Xtr.row(b).transpose());
  K.diagonal().array() += n * lambda;
  Vec y(n * Q);
  for (int a = 0; a < n; ++a) y.segment(a * Q, Q) = Ytr.row(a).transpose();
  const Vec alpha = K.ldlt().solve(y);
  Mat out(Xte.rows(), Q);
  for (int t = 0; t < Xte.rows(); ++t) {
    Vec f = Vec::Zero(Q);
    for (int a = 0; a < n; ++a) f += k.eval(Xte.row(t).transpose(), Xtr.row(a).transpose()) * alpha.segment(a * Q, Q);
    out.row(t) = f.transpose();
  }
  return out;
}

Vec arm_sigma(int segments, double sigma_len, double sigma_angle) {
  Vec s(2 * segments);
  s.head(segments).setConstant(sigma_len);
  s.tail(segments).setConstant(sigma_angle);
  return s;
}

Hyper cross_validate(const Dataset& d, const Mat& cov, const std::vector<double>& sigmas_len,
                     const std::vector<double>& sigmas, const std::vector<double>& lambdas, int folds,
                     std::uint64_t seed) {
  const int n = int(d.X.rows()), dim = int(d.X.cols());
  folds = std::clamp(folds, 2, n);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  Hyper best;
  best.cv_mse = std::numeric_limits<double>::infinity();
  for (double sl : sigmas_len)
    for (double s : sigmas)
      for (double lam : lambdas) {
      const KernelSpec k = KernelSpec::decomposable_gaussian(arm_sigma(dim / 2, sl, s), cov);
      double sse = 0.0;
      for (int f = 0; f < folds; ++f) {
        std::vector<int> tr, te;
        for (int i = 0; i < n; ++i) (i % folds == f ? te : tr).push_back(idx[i]);
        const Mat pred = ridge_predict(k, d.X(tr, Eigen::all), d.Y(tr, Eigen::all), d.X(te, Eigen::all), lam);
        sse += (pred - d.Y(te, Eigen::all)).squaredNorm();
      }
      const double mse = sse / double(n);
      if (mse < best.cv_mse) best = {sl, s, lam, mse};
      }
  return best;
}

struct ArmConstraint {
  ShapeConstraint c;
  InputBall ball;
  int i = 0, l = 0;
};

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

ExperimentResult run_robotarm(const ExperimentConfig& cfg) {
  const auto schemes = selected_schemes(cfg, {"none", "disc", "ball", "hyp"}, {"none", "disc", "ball", "hyp"});
  RobotArm arm;
  arm.segments = cfg.get<int>("segments", 2);
  if (arm.segments < 1 || arm.segments > 3) throw Error("robotarm: segments must be 1, 2 or 3");
  const int d = arm.dim();
  const int N = cfg.get<int>("N", 40);
  const double noise = cfg.get<double>("noise", 0.2);
  const int per_axis = cfg.get<int>("anchors_per_axis", 2);
  const int reps = cfg.get<int>("repetitions", 5);
  const int cov_samples = cfg.get<int>("covariance_samples", 1000);
  const double min_coef = cfg.get<double>("min_coefficient", 0.1);
  const double radius_fraction = cfg.get<double>("radius_fraction", 0.01);
  const int err_grid = cfg.get<int>("error_grid", 5);
  const int cons_points = cfg.get<int>("cons_points", 400);
  const int ball_points = cfg.get<int>("ball_points", 20);
  // one bandwidth for the lengths and one for the angles: the pose is linear in the lengths
  const auto sigmas_len = cfg.get<std::vector<double>>("sigmas_lengths", {1.0, 2.0});
  const auto sigmas = cfg.get<std::vector<double>>("sigmas_angles", {0.2, 0.3, 0.5});
  const auto lambdas = cfg.get<std::vector<double>>("lambdas", {1e-4, 1e-3, 1e-2});
  const int folds = cfg.get<int>("folds", 5);
  EtaConfig eta = eta_config(cfg, NormKind::euclidean);
  eta.n_x = cfg.get<int>("n_x", 1000);

  const Box unit{Vec::Zero(d), Vec::Ones(d)};
  // interior equispaced grid j / (n + 1); cell centers would put angles on the zeros of cos
  const double dx = 1.0 / (per_axis + 1);
  const double delta = radius_fraction * dx;
  const auto anchors = box_grid(Box{Vec::Constant(d, dx), Vec::Constant(d, 1.0 - dx)}, per_axis);
  const auto err_pts = box_grid(unit, err_grid);

  std::vector<ArmConstraint> cons;
  for (size_t m = 0; m < anchors.size(); ++m)
    for (int i = 0; i < arm.segments; ++i)
      for (int l = 0; l < 2; ++l) {
        const double c = arm.coefficient(anchors[m], i, l);
        if (std::abs(c) < min_coef) continue;
        ArmConstraint ac;
        ac.i = i;
        ac.l = l;
        ac.ball = InputBall{anchors[m], delta, NormKind::euclidean};
        ac.c.name = "m" + std::to_string(m) + "_i" + std::to_string(i) + "_l" + std::to_string(l);
        ac.c.region = Box{anchors[m].array() - delta, anchors[m].array() + delta};
        ac.c.op = SdpOperator::scalar(DiffFunctional::partial(MultiIndex::unit(d, i), l, c));
        ac.c.offset = Vec::Zero(1);
        cons.push_back(std::move(ac));
      }

  ExperimentResult res;
  CsvTable metrics({"repetition", "seed", "scheme", "sigma_lengths", "sigma_angles", "lambda", "N_C", "L2_err", "L1_cons",
                    "ball_violation_max", "status"});
  CsvTable timing({"repetition", "scheme", "seconds"});
  std::map<std::string, std::vector<double>> l1, l2, ballv;

  for (int r = 0; r < reps; ++r) {
    const std::uint64_t seed = cfg.seed + std::uint64_t(r);
    const Dataset data = synth_robot_data(arm, N, noise, seed);
    const Mat cov = robot_output_covariance(arm, cov_samples, seed + 1000003);
    const Hyper h = cross_validate(data, cov, sigmas_len, sigmas, lambdas, folds, seed);
    const KernelSpec kernel = KernelSpec::decomposable_gaussian(arm_sigma(arm.segments, h.sigma_len, h.sigma), cov);

    ProblemSpec p(kernel);
    p.loss = LossKind::squared;
    p.regularizer = {RegularizerKind::norm_squared, h.lambda, 0.0};
    for (int n = 0; n < N; ++n)
      for (int l = 0; l < 3; ++l)
        p.observations.push_back(
            {Atom{data.X.row(n).transpose(), DiffFunctional::value(d, l)}, data.Y(n, l), 1.0 / N, Vec()});
    for (const auto& ac : cons) p.constraints.push_back(ac.c);

    std::mt19937_64 rng(seed + 2000003);
    const auto cons_pts = latin_hypercube(cons_points, d, rng);
    std::vector<std::vector<Vec>> ball_samples;
    {
      const auto unit_pts = unit_ball_samples(d, ball_points, NormKind::euclidean, seed + 3000017);
      for (const auto& ac : cons) {
        std::vector<Vec> pts = {ac.ball.center};
        for (const auto& u : unit_pts) pts.push_back(ac.ball.center + delta * u);
        ball_samples.push_back(std::move(pts));
      }
    }

    for (const auto& scheme : schemes) {
      std::vector<ConicConstraintRecord> recs;
      if (scheme != "none")
        for (size_t k = 0; k < cons.size(); ++k) {
          auto rr = scheme_records(kernel, cons[k].c, {cons[k].ball}, scheme, eta, int(k));
          recs.insert(recs.end(), rr.begin(), rr.end());
        }
      ProblemSpec ps = p;
      if (scheme == "none") ps.constraints.clear();
      const auto t0 = Clock::now();
      const FitResult f = fit(ps, recs, cfg.solver);
      const double secs = seconds_since(t0);
      const Model& m = f.fit.model;

      double err = 0.0;
      for (const auto& z : err_pts) err += (arm.pose(z) - eval_model(m, z)).squaredNorm();
      err /= double(err_pts.size());
      double viol = 0.0;
      for (const auto& z : cons_pts)
        for (int i = 0; i < arm.segments; ++i)
          for (int l = 0; l < 2; ++l) {
            const double g = arm.coefficient(z, i, l) * apply(DiffFunctional::partial(MultiIndex::unit(d, i), l), m, z);
            viol += std::max(0.0, -g);
          }
      viol /= double(cons_pts.size());
      double bmax = 0.0;
      for (size_t k = 0; k < cons.size(); ++k)
        for (const auto& z : ball_samples[k]) {
          const double g = arm.coefficient(z, cons[k].i, cons[k].l) *
                           apply(DiffFunctional::partial(MultiIndex::unit(d, cons[k].i), cons[k].l), m, z);
          bmax = std::max(bmax, -g);
        }
      metrics.add_row({std::to_string(r), std::to_string(seed), scheme, csv_number(h.sigma_len), csv_number(h.sigma), csv_number(h.lambda),
                       std::to_string(cons.size()), csv_number(err), csv_number(viol), csv_number(bmax),
                       status_name(f.solution.status)});
      timing.add_row({std::to_string(r), scheme, csv_number(secs)});
      l1[scheme].push_back(viol);
      l2[scheme].push_back(err);
      ballv[scheme].push_back(bmax);
      if (r == 0) res.models.emplace_back(scheme, m);
    }
  }

  Json per = Json::object();
  for (const auto& s : schemes) {
    per[s] = {{"median_L1_cons", median(l1[s])},
              {"median_L2_err", median(l2[s])},
              {"max_ball_violation", *std::max_element(ballv[s].begin(), ballv[s].end())}};
  }
  res.summary["dim"] = d;
  res.summary["M"] = anchors.size();
  res.summary["N_C"] = cons.size();
  res.summary["N_C_bound"] = d * anchors.size();
  res.summary["delta"] = delta;
  res.summary["repetitions"] = reps;
  res.summary["schemes"] = per;
  res.tables["metrics.csv"] = metrics;
  res.timing_tables["timing.csv"] = timing;
  return res;
}

}  // namespace shapekernel::bench
