#include "shapekernel/covering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "shapekernel/error.hpp"

namespace shapekernel {

std::string norm_name(NormKind n) { return n == NormKind::max ? "max" : "euclidean"; }

NormKind norm_from_name(const std::string& s) {
  if (s == "max") return NormKind::max;
  if (s == "euclidean") return NormKind::euclidean;
  throw Error("unknown norm kind '" + s + "' (expected max or euclidean)");
}

double input_distance(const Vec& a, const Vec& b, NormKind norm) {
  return norm == NormKind::max ? (a - b).cwiseAbs().maxCoeff() : (a - b).norm();
}

bool Box::contains(const Vec& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  return true;
}

Box Box::clipped(const Vec& center, double radius) const {
  Box b{lo, hi};
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    b.lo[i] = std::max(lo[i], center[i] - radius);
    b.hi[i] = std::min(hi[i], center[i] + radius);
    if (b.lo[i] > b.hi[i]) b.lo[i] = b.hi[i] = std::clamp(center[i], lo[i], hi[i]);
  }
  return b;
}

std::vector<InputBall> cover_box_counts(const Box& box, const std::vector<int>& counts, NormKind norm) {
  const int d = box.dim();
  if (int(counts.size()) != d) throw Error("cover_box_counts: one count per axis required");
  Vec half(d);
  for (int i = 0; i < d; ++i) {
    if (counts[i] < 1) throw Error("cover_box_counts: counts must be positive");
    if (box.hi[i] < box.lo[i]) throw Error("cover_box: lo must not exceed hi");
    half[i] = (box.hi[i] - box.lo[i]) / (2.0 * counts[i]);
  }
  const double radius = norm == NormKind::max ? half.maxCoeff() : half.norm();
  std::vector<InputBall> out;
  std::vector<int> idx(d, 0);
  while (true) {
    InputBall b;
    b.center.resize(d);
    for (int i = 0; i < d; ++i) b.center[i] = box.lo[i] + (2 * idx[i] + 1) * half[i];
    b.radius = radius;
    b.norm = norm;
    out.push_back(std::move(b));
    int ax = 0;
    while (ax < d && ++idx[ax] == counts[ax]) idx[ax++] = 0;
    if (ax == d) break;
  }
  return out;
}

std::vector<InputBall> cover_box(const Box& box, double delta_max, NormKind norm) {
  if (!(delta_max > 0)) throw Error("cover_box: delta_max must be positive");
  const int d = box.dim();
  if (d == 0) throw Error("cover_box: empty box");
  const double per_axis = norm == NormKind::max ? delta_max : delta_max / std::sqrt(double(d));
  std::vector<int> counts(d);
  for (int i = 0; i < d; ++i) {
    const double len = box.hi[i] - box.lo[i];
    if (len < 0) throw Error("cover_box: lo must not exceed hi");
    const double c = len / (2.0 * per_axis);
    counts[i] = std::max(1, int(std::ceil(c - 1e-9)));
  }
  auto out = cover_box_counts(box, counts, norm);
  for (auto& b : out) b.radius = std::min(b.radius, delta_max);
  return out;
}

namespace {

// min over the unit-radius-scaled ball of the scalar radial kernel k(0, u).
double radial_min_k(const KernelSpec& kernel, double delta, NormKind norm) {
  const int d = kernel.input_dim();
  if (const auto* g = std::get_if<GaussianKernel>(&kernel.variant())) {
    if (norm == NormKind::max) return std::exp(-0.5 * delta * delta * (1.0 / g->sigma.array().square()).sum());
    return std::exp(-0.5 * delta * delta / std::pow(g->sigma.minCoeff(), 2));
  }
  if (const auto* l = std::get_if<LaplacianKernel>(&kernel.variant())) {
    const double r = norm == NormKind::max ? delta * std::sqrt(double(d)) : delta;
    return std::exp(-l->rate * r);
  }
  throw Error("radial formula needs a Gaussian or Laplacian kernel; use eta_sampled");
}

// |coeff| if D is a single scaled value functional, 0 otherwise.
double value_scale(const DiffFunctional& D) {
  if (D.terms().size() != 1 || D.terms().front().order.order() != 0) return 0.0;
  return std::abs(D.terms().front().coeff);
}

bool radial_kernel(const KernelSpec& k) {
  return std::holds_alternative<GaussianKernel>(k.variant()) || std::holds_alternative<LaplacianKernel>(k.variant());
}

Vec vec_outer(const Vec& u) {
  const int P = int(u.size());
  Vec v(P * P);
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < P; ++j) v[i * P + j] = u[i] * u[j];
  return v;
}

}  // namespace

double eta_radial(const KernelSpec& kernel, double delta, NormKind norm) {
  if (delta < 0) throw Error("eta_radial: negative radius");
  const double kmin = radial_min_k(kernel, delta, norm);
  return std::sqrt(std::max(0.0, 2.0 - 2.0 * kmin));
}

std::vector<Vec> unit_ball_samples(int dim, int count, NormKind norm, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<Vec> out;
  out.reserve(count + 2);
  if (dim == 1) {
    // the boundary of a 1-d ball is two points; include them
    out.push_back(Vec::Constant(1, -1.0));
    out.push_back(Vec::Constant(1, 1.0));
  }
  for (int k = 0; k < count; ++k) {
    Vec u(dim);
    if (norm == NormKind::max) {
      for (int i = 0; i < dim; ++i) u[i] = U(rng);
    } else {
      for (int i = 0; i < dim; ++i) u[i] = N(rng);
      const double r = std::pow(0.5 * (U(rng) + 1.0), 1.0 / dim);
      u *= r / std::max(u.norm(), 1e-300);
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Vec> sphere_directions(int P, int count, std::uint64_t seed) {
  if (P == 1) return {Vec::Ones(1)};
  std::vector<Vec> out;
  if (P == 2) {
    for (int j = 0; j < count; ++j) {
      const double th = M_PI * j / count;
      Vec u(2);
      u << std::cos(th), std::sin(th);
      out.push_back(u);
    }
    return out;
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int j = 0; j < count; ++j) {
    Vec u(P);
    for (int i = 0; i < P; ++i) u[i] = N(rng);
    out.push_back(u / u.norm());
  }
  return out;
}

Mat k_tensor(const KernelSpec& kernel, const SdpOperator& op, const Vec& x_prime, const Vec& x) {
  const int P = op.size();
  Mat T(P * P, P * P);
  for (int a = 0; a < P * P; ++a)
    for (int b = 0; b < P * P; ++b)
      T(a, b) = atom_inner(Atom{x, op.entry(a / P, a % P)}, Atom{x_prime, op.entry(b / P, b % P)}, kernel);
  return T;
}

Mat k_tensor_gap(const KernelSpec& kernel, const SdpOperator& op, const Vec& z, const Vec& x) {
  const Mat Tzz = k_tensor(kernel, op, z, z);
  const Mat Txx = k_tensor(kernel, op, x, x);
  const Mat Tzx = k_tensor(kernel, op, z, x);
  return Tzz + Txx - Tzx - Tzx.transpose();
}

namespace {

template <class F>
void for_each_sample(const KernelSpec& kernel, const SdpOperator& op, const Vec& z, double delta, NormKind norm,
                     int n_x, std::uint64_t seed, F&& f) {
  if (n_x < 1) throw Error("eta: n_x must be positive");
  if (delta < 0) throw Error("eta: negative radius");
  const auto offsets = unit_ball_samples(int(z.size()), n_x, norm, seed);
  for (const auto& u : offsets) f(k_tensor_gap(kernel, op, z, z + delta * u));
}

}  // namespace

double eta_sampled(const KernelSpec& kernel, const SdpOperator& op, const Vec& z, double delta, NormKind norm,
                   int n_x, int n_u, std::uint64_t seed) {
  if (n_u < 1) throw Error("eta: n_u must be positive");
  if (delta == 0.0) return 0.0;
  std::vector<Vec> dirs;
  for (const auto& u : sphere_directions(op.size(), n_u, seed)) dirs.push_back(vec_outer(u));
  double best = 0.0;
  for_each_sample(kernel, op, z, delta, norm, n_x, seed, [&](const Mat& S) {
    for (const auto& v : dirs) best = std::max(best, std::abs(v.dot(S * v)));
  });
  return std::sqrt(best);
}

double eta_eigen_bound(const KernelSpec& kernel, const SdpOperator& op, const Vec& z, double delta, NormKind norm,
                       int n_x, std::uint64_t seed) {
  if (delta == 0.0) return 0.0;
  double best = 0.0;
  for_each_sample(kernel, op, z, delta, norm, n_x, seed, [&](const Mat& S) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    best = std::max(best, es.eigenvalues().cwiseAbs().maxCoeff());
  });
  return std::sqrt(best);
}

EtaEstimator::EtaEstimator(KernelSpec kernel, SdpOperator op, EtaConfig cfg)
    : kernel_(std::move(kernel)), op_(std::move(op)), cfg_(cfg) {
  if (cfg_.use_analytic && op_.size() == 1 && radial_kernel(kernel_)) analytic_scale_ = value_scale(op_.entry(0, 0));
}

double EtaEstimator::operator()(const Vec& z, double delta) const {
  if (delta < 0) throw Error("eta: negative radius");
  if (delta == 0.0) return 0.0;
  if (analytic()) return analytic_scale_ * eta_radial(kernel_, delta, cfg_.norm);
  const bool ti = kernel_.translation_invariant();
  const long long key = std::llround(delta * 1e12);
  if (ti) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const Vec origin = ti ? Vec(Vec::Zero(z.size())) : z;
  const double v = (1.0 + cfg_.safety) * eta_sampled(kernel_, op_, origin, delta, cfg_.norm, cfg_.n_x, cfg_.n_u, cfg_.seed);
  if (ti) cache_[key] = v;
  return v;
}

double refine_radius(const EtaEstimator& eta, const Vec& z, double eta_target, double delta_hi) {
  if (!(eta_target > 0) || !(delta_hi > 0)) throw Error("refine_radius: invalid bracket (need eta_target > 0, delta_hi > 0)");
  if (eta(z, delta_hi) <= eta_target) return delta_hi;
  double lo = 0.0, hi = delta_hi;
  const double tol = 1e-6 * delta_hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (eta(z, mid) <= eta_target)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double rkhs_inner(const RkhsElement& a, const RkhsElement& b, const KernelSpec& kernel) {
  double s = 0.0;
  for (const auto& [ca, aa] : a.terms)
    for (const auto& [cb, ab] : b.terms) s += ca * cb * atom_inner(aa, ab, kernel);
  return s;
}

double min_self_inner(const KernelSpec& kernel, const DiffFunctional& D, const InputBall& ball, const EtaConfig& cfg) {
  const double beta = value_scale(D);
  if (cfg.use_analytic && beta > 0 && radial_kernel(kernel))
    return beta * beta * radial_min_k(kernel, ball.radius, ball.norm);
  const Atom c{ball.center, D};
  double best = atom_inner(c, c, kernel);
  for (const auto& u : unit_ball_samples(int(ball.center.size()), cfg.n_x, ball.norm, cfg.seed))
    best = std::min(best, atom_inner(c, Atom{ball.center + ball.radius * u, D}, kernel));
  return best;
}

double omega_diameter(const KernelSpec& kernel, const DiffFunctional& D, const Vec& center, double radius,
                      OmegaStyle style, const EtaConfig& cfg) {
  if (style == OmegaStyle::ball) {
    EtaEstimator eta(kernel, SdpOperator::scalar(D), cfg);
    return 2.0 * eta(center, radius);
  }
  const Atom c{center, D};
  const double r2 = atom_inner(c, c, kernel);
  const double rho = min_self_inner(kernel, D, InputBall{center, radius, cfg.norm}, cfg);
  const double ball_bound = 2.0 * std::sqrt(std::max(0.0, 2.0 * (r2 - rho)));
  const double cap = rho >= 0 ? 2.0 * std::sqrt(std::max(0.0, r2 - rho * rho / r2)) : 2.0 * std::sqrt(r2);
  return std::min(ball_bound, cap);
}

std::vector<OmegaSet> omega_cover(const KernelSpec& kernel, const DiffFunctional& D,
                                  const std::vector<InputBall>& cover, OmegaStyle style, const EtaConfig& cfg_in) {
  std::vector<OmegaSet> out;
  if (style == OmegaStyle::ball_halfspace && !kernel.translation_invariant())
    throw Error("ball_halfspace covering needs a translation-invariant kernel");
  for (const auto& b : cover) {
    if (!(b.radius > 0)) throw Error("omega_cover: degenerate input ball (radius 0); discretize this point instead");
    EtaConfig cfg = cfg_in;
    cfg.norm = b.norm;
    OmegaSet s;
    s.source = b;
    const Atom anchor{b.center, D};
    if (style == OmegaStyle::ball) {
      EtaEstimator eta(kernel, SdpOperator::scalar(D), cfg);
      const double r = eta(b.center, b.radius);
      if (!(r > 0)) throw Error("omega_cover: zero covering radius");
      s.balls.push_back({RkhsElement{{{1.0, anchor}}}, r});
      s.diameter = 2.0 * r;
    } else {
      const double r2 = atom_inner(anchor, anchor, kernel);
      if (!(r2 > 0)) throw Error("omega_cover: functional has zero norm");
      const double rho = min_self_inner(kernel, D, b, cfg);
      s.balls.push_back({RkhsElement{}, std::sqrt(r2)});
      s.halfspaces.push_back({RkhsElement{{{-1.0, anchor}}}, -rho});
      s.diameter = omega_diameter(kernel, D, b.center, b.radius, style, cfg);
    }
    out.push_back(std::move(s));
  }
  return out;
}

double fill_distance(const std::vector<Vec>& points, const Box& box, int grid_res, NormKind norm) {
  if (points.empty()) throw Error("fill_distance: empty point list");
  if (grid_res < 2) throw Error("fill_distance: grid_res must be at least 2");
  const int d = box.dim();
  std::vector<int> idx(d, 0);
  double worst = 0.0;
  Vec x(d);
  while (true) {
    for (int i = 0; i < d; ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (grid_res - 1);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points) best = std::min(best, input_distance(x, p, norm));
    worst = std::max(worst, best);
    int ax = 0;
    while (ax < d && ++idx[ax] == grid_res) idx[ax++] = 0;
    if (ax == d) break;
  }
  return worst;
}

void write_cover_csv(const std::string& path, const std::vector<InputBall>& cover, const std::vector<double>& etas) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f.precision(17);
  const int d = cover.empty() ? 0 : int(cover.front().center.size());
  for (int i = 0; i < d; ++i) f << 'x' << i << ',';
  f << "radius,eta\n";
  for (size_t m = 0; m < cover.size(); ++m) {
    for (int i = 0; i < d; ++i) f << cover[m].center[i] << ',';
    f << cover[m].radius << ',' << (m < etas.size() ? etas[m] : 0.0) << '\n';
  }
}

}  // namespace shapekernel
