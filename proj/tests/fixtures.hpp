#pragma once

// Small problem builders shared by the unit tests and the acceptance binary.

#include <random>
#include <string>
#include <vector>

#include "shapekernel/bench.hpp"

namespace fixture {

using namespace shapekernel;

// M max-norm balls of radius 0.3 / M over [0.2, 0.8].
inline std::vector<InputBall> catenary_cover(int M) {
  return cover_box(Box{Vec::Constant(1, 0.2), Vec::Constant(1, 0.8)}, 0.3 / M, NormKind::max);
}

inline std::vector<double> etas_for(const KernelSpec& k, const ShapeConstraint& c, const std::vector<InputBall>& cover,
                                    const EtaConfig& cfg = {}) {
  EtaEstimator est(k, c.op, cfg);
  std::vector<double> out;
  for (const auto& b : cover) out.push_back(est(b.center, b.radius));
  return out;
}

inline std::vector<Vec> centers(const std::vector<InputBall>& cover) {
  std::vector<Vec> out;
  for (const auto& b : cover) out.push_back(b.center);
  return out;
}

// scheme: ball, hyp or disc
inline std::vector<ConicConstraintRecord> catenary_records(const ProblemSpec& p, int M, const std::string& scheme) {
  const auto cover = catenary_cover(M);
  const ShapeConstraint& c = p.constraints[0];
  if (scheme == "disc") return discretize(c, centers(cover));
  if (scheme == "hyp") return tighten_omega(c, omega_cover(p.kernel, c.op.entry(0, 0), cover, OmegaStyle::ball_halfspace));
  return tighten_soc(c, cover, etas_for(p.kernel, c, cover));
}

// Random Gaussian-kernel model on [0,1]^d mixing value and first/second derivative atoms.
inline Model random_gaussian_model(int d, int atoms, std::mt19937_64& rng, double sigma = 0.6) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N;
  const KernelSpec k = KernelSpec::gaussian(d, sigma);
  std::vector<Atom> basis;
  Vec a(atoms);
  for (int j = 0; j < atoms; ++j) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = U(rng);
    MultiIndex r(d);
    const int kind = j % 3;
    if (kind >= 1) r = r + MultiIndex::unit(d, int(U(rng) * d) % d);
    if (kind == 2) r = r + MultiIndex::unit(d, int(U(rng) * d) % d);
    basis.push_back(Atom{x, DiffFunctional::partial(r)});
    a[j] = N(rng);
  }
  return Model(k, basis, a);
}

}  // namespace fixture
