#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "shapekernel/conic.hpp"

using namespace shapekernel;

namespace {

void check_kkt(const ConeProgram& p, const Solution& s) {
  const KktReport r = kkt_residuals(p, s);
  CHECK(r.stationarity <= 1e-7);
  CHECK(r.primal_feasibility <= 1e-7);
  CHECK(r.complementarity <= 1e-7);
  CHECK(r.cone_violation <= 1e-7);
}

}  // namespace

TEST_CASE("min x^2 subject to x >= 1") {
  ConeProgram p;
  p.add_variables(1, "x");
  p.P(0, 0) = 2.0;
  p.add_block(ConeKind::nonneg, {{{0, 1.0}}}, {-1.0}, "x>=1");
  const Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-6));
  check_kkt(p, s);
}

TEST_CASE("norm of a fixed vector via second-order cone") {
  ConeProgram p;
  p.add_variables(1, "t");
  p.q[0] = 1.0;
  p.add_block(ConeKind::soc, {{{0, 1.0}}, {}, {}}, {0.0, 3.0, 4.0}, "norm");
  const Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(std::abs(s.x[0] - 5.0) <= 1e-6);
  check_kkt(p, s);
}

TEST_CASE("rotated cone: min u+v s.t. 2uv >= 9") {
  ConeProgram p;
  p.add_variables(2, "uv");
  p.q << 1.0, 1.0;
  p.add_block(ConeKind::rsoc, {{{0, 1.0}}, {{1, 1.0}}, {}}, {0.0, 0.0, 3.0}, "2uv>=9");
  const Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::optimal);
  const double sweep = oracle::sweep_min([](double u) { return u + 9.0 / (2.0 * u); }, 0.1, 10.0, 200000);
  CHECK(std::abs(s.objective - 3.0 * std::sqrt(2.0)) <= 1e-6);
  CHECK(std::abs(s.objective - sweep) <= 1e-6);
  CHECK(std::abs(s.x[0] - 3.0 / std::sqrt(2.0)) <= 1e-5);
  check_kkt(p, s);
}

TEST_CASE("equality constrained least norm") {
  // min |x|^2 s.t. x0 + x1 + x2 = 3, x >= 0
  ConeProgram p;
  p.add_variables(3, "x");
  p.P = 2.0 * Mat::Identity(3, 3);
  p.add_block(ConeKind::zero, {{{0, 1.0}, {1, 1.0}, {2, 1.0}}}, {-3.0}, "sum");
  p.add_block(ConeKind::nonneg, {{{0, 1.0}}, {{1, 1.0}}, {{2, 1.0}}}, {0.0, 0.0, 0.0}, "pos");
  const Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::optimal);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(s.x[i] - 1.0) <= 1e-7);
  check_kkt(p, s);
}

TEST_CASE("random small QPs match active-set enumeration") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 3;
    const int m = 3 + trial % 4;
    Mat B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = N(rng);
    const Mat P = B * B.transpose() + 0.1 * Mat::Identity(n, n);
    Vec q(n), h(m);
    Mat G(m, n);
    for (int i = 0; i < n; ++i) q[i] = N(rng);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) G(i, j) = N(rng);
      h[i] = std::abs(N(rng)) + 0.1;  // x = 0 strictly feasible
    }
    const auto ref = oracle::qp_active_set(P, q, G, h);
    REQUIRE(ref.has_value());
    ConeProgram p;
    p.add_variables(n, "x");
    p.P = P;
    p.q = q;
    p.add_block(ConeKind::nonneg, Mat(-G), h, "Gx<=h");
    const Solution s = solve(p);
    REQUIRE(s.status == SolveStatus::optimal);
    CHECK(std::abs(s.objective - ref->second) <= 1e-6 * (1.0 + std::abs(ref->second)));
    check_kkt(p, s);
    ++checked;
  }
  CHECK(checked == 50);
}

TEST_CASE("objective scaling leaves the argmin unchanged") {
  ConeProgram p;
  p.add_variables(3, "x");
  p.P = Mat::Identity(3, 3);
  p.P(0, 1) = p.P(1, 0) = 0.3;
  p.q << 1.0, -2.0, 0.5;
  p.add_block(ConeKind::soc, {{}, {{0, 1.0}}, {{1, 1.0}}, {{2, 1.0}}}, {1.0, 0.0, 0.0, 0.0}, "ball");
  p.add_block(ConeKind::nonneg, {{{0, 1.0}, {2, 1.0}}}, {0.2}, "half");
  const Solution s1 = solve(p);
  ConeProgram p2 = p;
  p2.P *= 1e3;
  p2.q *= 1e3;
  const Solution s2 = solve(p2);
  REQUIRE(s1.status == SolveStatus::optimal);
  REQUIRE(s2.status == SolveStatus::optimal);
  CHECK((s1.x - s2.x).norm() <= 1e-6);
}

TEST_CASE("infeasible program is reported as status") {
  ConeProgram p;
  p.add_variables(1, "x");
  p.q[0] = 1.0;
  p.add_block(ConeKind::nonneg, {{{0, 1.0}}, {{0, -1.0}}}, {-2.0, 1.0}, "x>=2,x<=1");
  const Solution s = solve(p);
  CHECK(s.status != SolveStatus::optimal);
}

TEST_CASE("unconstrained quadratic solves in closed form") {
  ConeProgram p;
  p.add_variables(2, "x");
  p.P = Mat::Identity(2, 2) * 4.0;
  p.q << -4.0, 8.0;
  const Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(std::abs(s.x[0] - 1.0) <= 1e-12);
  CHECK(std::abs(s.x[1] + 2.0) <= 1e-12);
}

TEST_CASE("large second-order cone path agrees with small-cone path") {
  // min c'x s.t. |x| <= 1 in dimension 40 -> x = -c/|c|
  const int n = 40;
  ConeProgram p;
  p.add_variables(n, "x");
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int i = 0; i < n; ++i) p.q[i] = N(rng);
  std::vector<SparseRow> rows(n + 1);
  std::vector<double> c(n + 1, 0.0);
  c[0] = 1.0;
  for (int i = 0; i < n; ++i) rows[i + 1] = {{i, 1.0}};
  p.add_block(ConeKind::soc, rows, c, "ball");
  const Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK((s.x + p.q / p.q.norm()).norm() <= 1e-6);
  check_kkt(p, s);
}
