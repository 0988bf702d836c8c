#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shapekernel/diffop.hpp"

namespace shapekernel {

enum class NormKind { euclidean, max };

std::string norm_name(NormKind n);
NormKind norm_from_name(const std::string& s);
double input_distance(const Vec& a, const Vec& b, NormKind norm);

struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x, double tol = 1e-12) const;
  // Intersection with the norm ball's bounding box.
  Box clipped(const Vec& center, double radius) const;
};

struct InputBall {
  Vec center;
  double radius = 0.0;
  NormKind norm = NormKind::max;
};

// Uniform grid with ceil((hi - lo) / (2 delta_max)) cells per axis (max norm);
// the euclidean variant refines the grid by sqrt(d) so that radii stay <= delta_max.
std::vector<InputBall> cover_box(const Box& box, double delta_max, NormKind norm);
// Grid with prescribed per-axis counts.
std::vector<InputBall> cover_box_counts(const Box& box, const std::vector<int>& counts, NormKind norm);

// sqrt(2 K0(0) - 2 K0(delta)) for Gaussian and Laplacian kernels with the identity functional.
double eta_radial(const KernelSpec& kernel, double delta, NormKind norm = NormKind::max);

// Unit-ball offsets used by the samplers (deterministic in seed).
std::vector<Vec> unit_ball_samples(int dim, int count, NormKind norm, std::uint64_t seed);
std::vector<Vec> sphere_directions(int P, int count, std::uint64_t seed);

// Entry [(p1,p2), (p1',p2')] = D_{p1',p2'}^T D_{p1,p2} K(x', x), i.e. the P^2 x P^2 tensor of the operator.
Mat k_tensor(const KernelSpec& kernel, const SdpOperator& op, const Vec& x_prime, const Vec& x);
// K(z,z) + K(x,x) - 2 sym K(z,x) as a P^2 x P^2 symmetric matrix.
Mat k_tensor_gap(const KernelSpec& kernel, const SdpOperator& op, const Vec& z, const Vec& x);

double eta_sampled(const KernelSpec& kernel, const SdpOperator& op, const Vec& z, double delta, NormKind norm,
                   int n_x, int n_u, std::uint64_t seed);
double eta_eigen_bound(const KernelSpec& kernel, const SdpOperator& op, const Vec& z, double delta, NormKind norm,
                       int n_x, std::uint64_t seed);

struct EtaConfig {
  NormKind norm = NormKind::max;
  int n_x = 50;
  int n_u = 20;
  std::uint64_t seed = 0;
  double safety = 0.0;  // sampled values are inflated by (1 + safety)
  bool use_analytic = true;
};

// eta(z, delta) for a fixed kernel and operator, with the radial shortcut when it applies
// and a per-delta cache for translation-invariant kernels. Not thread-safe.
class EtaEstimator {
 public:
  EtaEstimator(KernelSpec kernel, SdpOperator op, EtaConfig cfg = {});

  double operator()(const Vec& z, double delta) const;
  bool analytic() const { return analytic_scale_ > 0.0; }
  const KernelSpec& kernel() const { return kernel_; }
  const SdpOperator& op() const { return op_; }
  const EtaConfig& config() const { return cfg_; }

 private:
  KernelSpec kernel_;
  SdpOperator op_;
  EtaConfig cfg_;
  double analytic_scale_ = 0.0;
  mutable std::map<long long, double> cache_;
};

// Largest delta in [0, delta_hi] with eta(z, delta) <= eta_target, by bisection.
double refine_radius(const EtaEstimator& eta, const Vec& z, double eta_target, double delta_hi);

struct RkhsElement {
  std::vector<std::pair<double, Atom>> terms;  // sum coef * atom
  bool is_zero() const { return terms.empty(); }
};

double rkhs_inner(const RkhsElement& a, const RkhsElement& b, const KernelSpec& kernel);

struct OmegaBall {
  RkhsElement center;
  double radius = 0.0;
};

// {g : <g, normal> <= offset}
struct OmegaHalfspace {
  RkhsElement normal;
  double offset = 0.0;
};

struct OmegaSet {
  std::vector<OmegaBall> balls;
  std::vector<OmegaHalfspace> halfspaces;
  double diameter = 0.0;
  InputBall source;
};

enum class OmegaStyle { ball, ball_halfspace };

std::vector<OmegaSet> omega_cover(const KernelSpec& kernel, const DiffFunctional& D,
                                  const std::vector<InputBall>& cover, OmegaStyle style, const EtaConfig& cfg = {});

// min over the input ball of D^T D K(center, x).
double min_self_inner(const KernelSpec& kernel, const DiffFunctional& D, const InputBall& ball, const EtaConfig& cfg);

// Diameter bound of the omega element built from an input ball of the given radius.
double omega_diameter(const KernelSpec& kernel, const DiffFunctional& D, const Vec& center, double radius,
                      OmegaStyle style, const EtaConfig& cfg);

double fill_distance(const std::vector<Vec>& points, const Box& box, int grid_res,
                     NormKind norm = NormKind::euclidean);

void write_cover_csv(const std::string& path, const std::vector<InputBall>& cover, const std::vector<double>& etas);

}  // namespace shapekernel
