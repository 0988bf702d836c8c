#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "shapekernel/error.hpp"
#include "shapekernel/soap.hpp"

using namespace shapekernel;

namespace {

Vec pt1(double x) { return Vec::Constant(1, x); }

SoapSettings catenary_settings(SoapMode mode, int k_max) {
  SoapSettings s;
  s.mode = mode;
  s.gamma = 0.8;
  s.delta0 = 0.01;
  s.tol_sat = 1e-8;
  s.k_max = k_max;
  return s;
}

bool covers(const std::vector<SoapElement>& cov, const Box& box, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int s = 0; s < n; ++s) {
    Vec x(box.dim());
    for (int i = 0; i < box.dim(); ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * U(rng);
    bool hit = false;
    for (const auto& e : cov)
      if (input_distance(x, e.ball.center, e.ball.norm) <= e.ball.radius * (1 + 1e-12)) {
        hit = true;
        break;
      }
    if (!hit) return false;
  }
  return true;
}

double fine_relaxation() {
  static const double v = bench::catenary_reference(10000).norm();
  return v;
}

}  // namespace

TEST_CASE("no saturation when every slack is large") {
  const KernelSpec k = KernelSpec::gaussian(1, 0.01);
  ProblemSpec p(k);
  p.regularizer.kind = RegularizerKind::norm;
  ShapeConstraint c;
  c.name = "floor";
  c.region = Box{pt1(0.2), pt1(0.8)};
  c.op = SdpOperator::scalar(DiffFunctional::value(1));
  c.offset = Vec::Constant(1, 0.5);
  const auto recs = discretize(c, {pt1(0.3), pt1(0.5), pt1(0.7)});
  const std::vector<Atom> B = {Atom{pt1(0.3), DiffFunctional::value(1)}, Atom{pt1(0.5), DiffFunctional::value(1)},
                               Atom{pt1(0.7), DiffFunctional::value(1)}};
  const Model all_slack(k, B, Vec::Ones(3));
  CHECK(detect_saturated(all_slack, recs, 1e-8).empty());
  // exact equality at the first anchor only; neighbours contribute exp(-200) which rounds away
  const Model one(k, B, (Vec(3) << 0.5, 1.0, 1.0).finished());
  REQUIRE(eval_model(one, pt1(0.3))[0] == 0.5);
  const auto sat = detect_saturated(one, recs, 1e-8);
  REQUIRE(sat.size() == 1);
  CHECK(sat[0].element == 0);
  CHECK(sat[0].constraint == 0);
}

TEST_CASE("first catenary iterate saturates the flat parts symmetrically") {
  const ProblemSpec p = bench::catenary_problem();
  const auto recs = fixture::catenary_records(p, 30, "ball");
  const FitResult r = fit(p, recs);
  const double tol = 1e-8 * (1 + r.fit.model.norm());
  const auto sat = detect_saturated(r.fit.model, r.problem.records, tol);
  REQUIRE_FALSE(sat.empty());
  CHECK(sat.size() < 30);
  std::vector<bool> s(30, false);
  for (const auto& pv : sat) s[pv.element] = true;
  for (int m = 0; m < 30; ++m) CHECK(s[m] == s[29 - m]);
  // the peak at 0.5 lies far above the floor
  CHECK_FALSE(s[14]);
  CHECK_FALSE(s[15]);
}

TEST_CASE("slack constraint terminates at the first iterate") {
  bench::CatenaryConfig cfg;
  cfg.floor = -10.0;
  const ProblemSpec p = bench::catenary_problem(cfg);
  const SoapResult r = run_soap(p, catenary_settings(SoapMode::ball, 30));
  REQUIRE(r.state.history.size() == 1);
  CHECK(r.state.history[0].bursts == 0);
  CHECK(r.state.k == 0);
}

TEST_CASE("ball-mode iterates keep coverage, certificates and lineages") {
  const ProblemSpec p = bench::catenary_problem();
  const double v_relax = fine_relaxation();
  for (int k_max : {1, 3, 6}) {
    const SoapSettings s = catenary_settings(SoapMode::ball, k_max);
    const SoapResult r = run_soap(p, s);
    const auto& cov = r.state.coverings[0];
    CHECK(covers(cov, p.constraints[0].region, 10000, 40 + k_max));
    for (const auto& h : r.state.history) CHECK(h.value >= v_relax - 1e-7);
    std::map<long, SoapElement> initial;
    for (const auto& e : r.state.initial_coverings[0]) initial[e.id] = e;
    for (const auto& e : cov) {
      CHECK(e.ball.radius <= std::pow(s.gamma, e.generation) * s.delta0 * (1 + 1e-12));
      if (e.generation == 0) {
        // never burst: bitwise identical to the initial element
        REQUIRE(initial.count(e.id) == 1);
        const SoapElement& i = initial[e.id];
        CHECK(i.ball.center[0] == e.ball.center[0]);
        CHECK(i.ball.radius == e.ball.radius);
        CHECK(i.eta == e.eta);
      } else {
        CHECK(e.parent >= 0);
      }
    }
  }
}

TEST_CASE("slow contraction still bounds lineage radii") {
  const ProblemSpec p = bench::catenary_problem();
  SoapSettings s = catenary_settings(SoapMode::ball, 3);
  s.gamma = 0.999;
  const SoapResult r = run_soap(p, s);
  int refined = 0;
  for (const auto& e : r.state.coverings[0]) {
    CHECK(e.ball.radius <= std::pow(s.gamma, e.generation) * s.delta0 * (1 + 1e-12));
    refined += e.generation > 0;
  }
  CHECK(refined > 0);
}

TEST_CASE("omega-mode iterates keep coverage and certificates") {
  const ProblemSpec p = bench::catenary_problem();
  const SoapResult r = run_soap(p, catenary_settings(SoapMode::omega, 3));
  CHECK(covers(r.state.coverings[0], p.constraints[0].region, 10000, 5));
  for (const auto& h : r.state.history) CHECK(h.value >= fine_relaxation() - 1e-7);
  CHECK(verify_pointwise(r.model, p.constraints[0], 10000).max_violation <= 1e-6);
}

TEST_CASE("invalid settings are rejected") {
  const ProblemSpec p = bench::catenary_problem();
  SoapSettings s;
  s.gamma = 1.0;
  CHECK_THROWS_AS(run_soap(p, s), Error);
  s.gamma = 0.8;
  s.delta0 = 0.0;
  CHECK_THROWS_AS(run_soap(p, s), Error);
}

TEST_CASE("ball-mode value approaches the fine relaxation within 30 iterations") {
  const ProblemSpec p = bench::catenary_problem();
  const SoapResult r = run_soap(p, catenary_settings(SoapMode::ball, 30));
  const double v_relax = fine_relaxation();
  double best = 1e300;
  for (const auto& h : r.state.history) best = std::min(best, std::abs(h.value - v_relax));
  MESSAGE("closest |v_k - v_relax| = " << best << ", elements " << r.state.history.back().elements);
  CHECK(best <= 1e-3 * (1 + std::abs(v_relax)));
}
