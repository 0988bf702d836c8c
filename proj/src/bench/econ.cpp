#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bench_internal.hpp"
#include "shapekernel/error.hpp"

namespace shapekernel::bench {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void standardize(Mat& M, Vec& mean, Vec& sd) {
  const double n = double(M.rows());
  mean = M.colwise().mean().transpose();
  sd.resize(M.cols());
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    const double v = (M.col(j).array() - mean[j]).square().sum() / (n - 1.0);
    sd[j] = std::sqrt(v);
    if (!(sd[j] > 0)) throw Error("standardization: column " + std::to_string(j) + " is constant");
    M.col(j) = (M.col(j).array() - mean[j]) / sd[j];
  }
}

}  // namespace

Dataset preprocess_labour(Mat raw, bool synthetic) {
  if (raw.cols() != 3) throw Error("labour data needs columns capital, labour, output");
  if (raw.rows() < 3) throw Error("labour data needs at least three rows");
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    if (!(raw(i, 2) > 0)) throw Error("labour data row " + std::to_string(i + 1) + ": output must be positive");
  Mat M = raw;
  M.col(2) = -M.col(2).array().log();
  const Mat logged = M;
  Vec mean, sd;
  standardize(M, mean, sd);
  std::vector<int> keep, dropped;
  for (Eigen::Index i = 0; i < M.rows(); ++i) (std::abs(M(i, 2)) > 3.0 ? dropped : keep).push_back(int(i));
  Mat K = logged(keep, Eigen::all);
  standardize(K, mean, sd);
  Dataset d;
  d.X = K.leftCols(2);
  d.Y = K.rightCols(1);
  d.prep.log_output = true;
  d.prep.negate_output = true;
  d.prep.mean = mean;
  d.prep.stddev = sd;
  d.prep.dropped_rows = dropped;
  d.prep.synthetic = synthetic;
  d.prep.raw_rows = raw.rows();
  return d;
}

Dataset load_labour_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  const auto header = split_csv_line(line);
  int col[3] = {-1, -1, -1};
  const char* names[3] = {"capital", "labour", "output"};
  for (size_t j = 0; j < header.size(); ++j)
    for (int k = 0; k < 3; ++k)
      if (lower(header[j]) == names[k]) col[k] = int(j);
  for (int k = 0; k < 3; ++k)
    if (col[k] < 0) throw Error(path + ": missing column " + names[k]);
  std::vector<std::array<double, 3>> rows;
  std::vector<long> bad;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    std::array<double, 3> r{};
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k) {
      if (col[k] >= int(f.size())) {
        ok = false;
        break;
      }
      try {
        size_t used = 0;
        r[k] = std::stod(f[col[k]], &used);
        ok = used == f[col[k]].size() && std::isfinite(r[k]);
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (ok)
      rows.push_back(r);
    else
      bad.push_back(lineno);
  }
  if (!bad.empty()) {
    std::string list;
    for (size_t i = 0; i < bad.size() && i < 20; ++i) list += (i ? ", " : "") + std::to_string(bad[i]);
    if (bad.size() > 20) list += ", ...";
    throw Error(path + ": malformed rows at lines " + list);
  }
  Mat raw(long(rows.size()), 3);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < 3; ++k) raw(long(i), k) = rows[i][k];
  return preprocess_labour(raw, false);
}

Dataset synthetic_labour(int rows, std::uint64_t seed, double input_log_sd, double noise) {
  // Cobb-Douglas output x1^0.4 x2^0.5 with log-normal inputs and multiplicative noise
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Mat raw(rows, 3);
  for (int i = 0; i < rows; ++i) {
    const double k = std::exp(input_log_sd * N(rng)), l = std::exp(input_log_sd * N(rng));
    raw(i, 0) = k;
    raw(i, 1) = l;
    raw(i, 2) = std::pow(k, 0.4) * std::pow(l, 0.5) * std::exp(noise * N(rng));
  }
  return preprocess_labour(raw, true);
}

namespace {

struct Regime {
  std::string name;
  bool mono = false, conv = false;
};

double mse(const Model& m, const Mat& X, const Mat& Y, const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx) {
    const double r = Y(i, 0) - eval_model(m, X.row(i).transpose())[0];
    s += r * r;
  }
  return idx.empty() ? 0.0 : s / double(idx.size());
}

ProblemSpec econ_problem(const KernelSpec& k, const Dataset& d, const std::vector<int>& train, double bound) {
  ProblemSpec p(k);
  p.loss = LossKind::squared;
  p.regularizer = {RegularizerKind::norm_bound, 1.0, bound};
  for (int i : train)
    p.observations.push_back(
        {Atom{d.X.row(i).transpose(), DiffFunctional::value(2)}, d.Y(i, 0), 1.0 / double(train.size()), Vec()});
  return p;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::vector<ShapeConstraint> econ_constraints(const Box& kcons, bool mono, bool conv) {
  std::vector<ShapeConstraint> out;
  if (mono)
    for (int j = 0; j < 2; ++j) {
      ShapeConstraint c;
      c.name = "decreasing_" + std::to_string(j + 1);
      c.region = kcons;
      c.op = SdpOperator::scalar(DiffFunctional::partial(MultiIndex::unit(2, j), 0, -1.0));
      c.offset = Vec::Zero(1);
      out.push_back(c);
    }
  if (conv) {
    ShapeConstraint c;
    c.name = "convex";
    c.region = kcons;
    const auto h = [](int a, int b) { return DiffFunctional::partial(MultiIndex::unit(2, a) + MultiIndex::unit(2, b)); };
    c.op = SdpOperator({{h(0, 0), h(0, 1)}, {h(1, 0), h(1, 1)}});
    c.offset = Vec::Zero(2);
    out.push_back(c);
  }
  return out;
}

ExperimentResult run_econ(const ExperimentConfig& cfg) {
  const auto schemes = selected_schemes(cfg, {"ball", "disc"}, {"ball"});
  const std::string scheme = schemes.front();
  ExperimentResult res;

  Dataset data;
  const std::string path = cfg.get<std::string>("data_path", "");
  std::string warning;
  if (!path.empty() && std::filesystem::exists(path)) {
    data = load_labour_csv(path);
  } else {
    warning = path.empty() ? "no data_path given; using the synthetic Cobb-Douglas data"
                           : "dataset " + path + " not found; using the synthetic Cobb-Douglas data";
    data = synthetic_labour(cfg.get<int>("synthetic_rows", 569), cfg.seed, cfg.get<double>("synthetic_input_log_sd", 0.8),
                            cfg.get<double>("synthetic_noise", 0.1));
  }
  const int n_tot = int(data.X.rows());
  res.summary["dataset"] = {{"synthetic", data.prep.synthetic},
                            {"raw_rows", data.prep.raw_rows},
                            {"kept_rows", n_tot},
                            {"dropped_rows", data.prep.dropped_rows.size()},
                            {"mean", std::vector<double>(data.prep.mean.data(), data.prep.mean.data() + 3)},
                            {"stddev", std::vector<double>(data.prep.stddev.data(), data.prep.stddev.data() + 3)}};
  if (!warning.empty()) res.summary["warning"] = warning;
  if (!data.prep.synthetic && n_tot != 543)
    res.summary["row_count_mismatch"] = "outlier rule kept " + std::to_string(n_tot) + " rows, expected 543";

  // bandwidth: square root of the 8th decile of squared pairwise distances
  std::vector<double> d2;
  d2.reserve(size_t(n_tot) * (n_tot - 1) / 2);
  for (int a = 0; a < n_tot; ++a)
    for (int b = a + 1; b < n_tot; ++b) d2.push_back((data.X.row(a) - data.X.row(b)).squaredNorm());
  const size_t q = size_t(0.8 * double(d2.size() - 1));
  std::nth_element(d2.begin(), d2.begin() + long(q), d2.end());
  const double sigma = cfg.get<double>("sigma", std::sqrt(d2[q]));
  const KernelSpec kernel = KernelSpec::gaussian(2, sigma);

  const double hi = cfg.get<double>("kcons_hi", 2.0);
  const Box kcons{data.X.colwise().minCoeff().transpose(), Vec::Constant(2, hi)};
  if ((kcons.hi - kcons.lo).minCoeff() <= 0) throw Error("econ: empty constraint box");
  const int per_axis = cfg.get<int>("cover_per_axis", 15);
  const auto cover = cover_box_counts(kcons, {per_axis, per_axis}, NormKind::max);
  const EtaConfig eta = eta_config(cfg, NormKind::max);

  const int reps = cfg.get<int>("repetitions", 5);
  const int folds = cfg.get<int>("folds", 5);
  const double train_frac = cfg.get<double>("train_fraction", 0.1);
  const auto bounds = cfg.get<std::vector<double>>("norm_bounds", {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0});
  std::vector<Regime> regimes = {{"none", false, false}, {"mono", true, false}, {"conv", false, true},
                                 {"both", true, true}};
  if (cfg.params.contains("regimes")) {
    const auto want = cfg.params["regimes"].get<std::vector<std::string>>();
    std::erase_if(regimes, [&](const Regime& r) { return std::find(want.begin(), want.end(), r.name) == want.end(); });
    if (regimes.empty()) throw Error("econ: no known regime in regimes (none, mono, conv, both)");
  }
  const bool certificate = cfg.get<bool>("certificate", true);

  // records per constraint, shared by every repetition
  std::map<std::string, std::vector<ConicConstraintRecord>> recs_of;
  std::map<std::string, std::vector<ShapeConstraint>> cons_of;
  for (const auto& r : regimes) {
    auto cons = econ_constraints(kcons, r.mono, r.conv);
    std::vector<ConicConstraintRecord> recs;
    for (size_t i = 0; i < cons.size(); ++i) {
      auto rr = scheme_records(kernel, cons[i], cover, scheme, eta, int(i));
      recs.insert(recs.end(), rr.begin(), rr.end());
    }
    recs_of[r.name] = std::move(recs);
    cons_of[r.name] = std::move(cons);
  }

  CsvTable metrics({"repetition", "regime", "norm_bound", "train_mse", "test_mse", "status"});
  CsvTable cv_table({"repetition", "norm_bound", "cv_mse"});
  CsvTable cert({"repetition", "regime", "v_app", "v_relax", "gap"});
  CsvTable timing({"repetition", "regime", "seconds"});
  std::map<std::string, std::vector<double>> test_mse, train_mse;
  Json cert_json = Json::array();

  for (int rep = 0; rep < reps; ++rep) {
    std::mt19937_64 rng(cfg.seed * 1000003ULL + std::uint64_t(rep) + 17);
    std::vector<int> idx(n_tot);
    for (int i = 0; i < n_tot; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n_val = n_tot / 2;
    std::vector<int> val(idx.begin(), idx.begin() + n_val), test(idx.begin() + n_val, idx.end());

    // cross-validated bound for the unconstrained problem on the validation half
    double best_bound = bounds.front(), best_cv = std::numeric_limits<double>::infinity();
    for (double b : bounds) {
      double sse = 0.0;
      const int kf = std::clamp(folds, 2, n_val);
      for (int f = 0; f < kf; ++f) {
        std::vector<int> tr, te;
        for (int i = 0; i < n_val; ++i) (i % kf == f ? te : tr).push_back(val[i]);
        const auto fr = fit(econ_problem(kernel, data, tr, b), {}, cfg.solver);
        sse += mse(fr.fit.model, data.X, data.Y, te) * double(te.size());
      }
      const double cvm = sse / n_val;
      cv_table.add_numbers({double(rep), b, cvm});
      if (cvm < best_cv) best_cv = cvm, best_bound = b;
    }
    std::vector<int> train(val.begin(), val.begin() + std::max(2, int(std::lround(train_frac * n_val))));

    for (const auto& r : regimes) {
      ProblemSpec p = econ_problem(kernel, data, train, best_bound);
      p.constraints = cons_of[r.name];
      const auto t0 = Clock::now();
      const FitResult f = fit(p, recs_of[r.name], cfg.solver);
      timing.add_row({std::to_string(rep), r.name, csv_number(seconds_since(t0))});
      const double tr_mse = mse(f.fit.model, data.X, data.Y, train), te_mse = mse(f.fit.model, data.X, data.Y, test);
      metrics.add_row({std::to_string(rep), r.name, csv_number(best_bound), csv_number(tr_mse), csv_number(te_mse),
                       status_name(f.solution.status)});
      test_mse[r.name].push_back(te_mse);
      train_mse[r.name].push_back(tr_mse);
      if (rep == 0) res.models.emplace_back(r.name, f.fit.model);
      if (certificate && scheme == "ball" && r.name != "none") {
        std::vector<ConicConstraintRecord> drecs;
        for (size_t i = 0; i < p.constraints.size(); ++i) {
          auto dd = scheme_records(kernel, p.constraints[i], cover, "disc", eta, int(i));
          drecs.insert(drecs.end(), dd.begin(), dd.end());
        }
        const double vr = fit(p, drecs, cfg.solver).fit.objective;
        BoundInputs bi;
        bi.v_app = f.fit.objective;
        bi.v_relax = vr;
        const auto br = compute_bounds(bi);
        cert.add_row({std::to_string(rep), r.name, csv_number(br.v_app), csv_number(vr), csv_number(*br.gap)});
        Json j = bound_to_json(br);
        j["repetition"] = rep;
        j["regime"] = r.name;
        cert_json.push_back(j);
      }
    }
  }
  if (cert.rows() > 0) res.tables["certificate.csv"] = cert;

  Json per = Json::object();
  for (const auto& r : regimes)
    per[r.name] = {{"median_test_mse", median(test_mse[r.name])}, {"median_train_mse", median(train_mse[r.name])}};
  res.summary["sigma"] = sigma;
  res.summary["kcons"] = {{"lo", std::vector<double>{kcons.lo[0], kcons.lo[1]}},
                          {"hi", std::vector<double>{kcons.hi[0], kcons.hi[1]}}};
  res.summary["anchors"] = cover.size();
  res.summary["scheme"] = scheme;
  res.summary["regimes"] = per;
  res.summary["certificates"] = cert_json;
  res.tables["metrics.csv"] = metrics;
  res.tables["cv.csv"] = cv_table;
  res.timing_tables["timing.csv"] = timing;
  return res;
}

}  // namespace shapekernel::bench
