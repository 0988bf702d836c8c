#include <cmath>
#include <random>

#include "doctest.h"
#include "shapekernel/error.hpp"
#include "shapekernel/kernel.hpp"

using namespace shapekernel;

namespace {

Mat control_A() {
  Mat A(2, 2);
  A << 0, 1, 0, -1;
  return A;
}

Mat control_B() {
  Mat B(2, 1);
  B << 0, 1;
  return B;
}

// e^{uA} B for the double integrator with damping, in closed form.
Eigen::Vector2d expAB(double u) { return {1.0 - std::exp(-u), std::exp(-u)}; }

Mat lti_simpson(double s, double t, int n) {
  const double T = std::min(s, t);
  Mat out = Mat::Zero(2, 2);
  if (T == 0.0) return out;
  const double h = T / n;
  for (int i = 0; i <= n; ++i) {
    const double tau = i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    out += w * expAB(s - tau) * expAB(t - tau).transpose();
  }
  return out * h / 3.0;
}

std::vector<MultiIndex> orders_upto2(int d) {
  std::vector<MultiIndex> out;
  out.emplace_back(d);
  for (int i = 0; i < d; ++i) out.push_back(MultiIndex::unit(d, i));
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) out.push_back(MultiIndex::unit(d, i) + MultiIndex::unit(d, j));
  return out;
}

}  // namespace

TEST_CASE("gaussian at coincident points is one") {
  const KernelSpec k = KernelSpec::gaussian(1, 1.0);
  Vec x(1);
  x << 0.3;
  CHECK(k.eval(x, x)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("laplacian value") {
  const KernelSpec k = KernelSpec::laplacian(5.0);
  Vec a(1), b(1);
  a << 0.0;
  b << 0.01;
  CHECK(std::abs(k.eval(a, b)(0, 0) - std::exp(-0.05)) <= 1e-15);
  CHECK(std::abs(k.eval(a, b)(0, 0) - 0.951229) <= 1e-6);
}

TEST_CASE("dimension mismatch is rejected with both sizes") {
  const KernelSpec k = KernelSpec::gaussian(2, 1.0);
  Vec a = Vec::Zero(2), b = Vec::Zero(3);
  try {
    k.eval(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find('3') != std::string::npos);
    CHECK(msg.find('2') != std::string::npos);
  }
}

TEST_CASE("lti kernel vanishes at time zero") {
  const KernelSpec k = KernelSpec::lti_control(control_A(), control_B());
  for (double t : {0.0, 0.3, 1.0}) {
    Vec a(1), b(1);
    a << 0.0;
    b << t;
    CHECK(k.eval(a, b).norm() == 0.0);
    CHECK(lti_eval(control_A(), control_B(), t, 0.0).norm() == 0.0);
  }
}

TEST_CASE("lti velocity variance at t = 1") {
  const Mat K = lti_eval(control_A(), control_B(), 1.0, 1.0);
  CHECK(std::abs(K(1, 1) - (1.0 - std::exp(-2.0)) / 2.0) <= 1e-12);
  CHECK(std::abs(K(1, 1) - 0.432332) <= 1e-6);
  // trapezoid rule on 1e4 points
  const int n = 10000;
  double trap = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double tau = double(i) / n;
    trap += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(-2.0 * (1.0 - tau));
  }
  trap /= n;
  CHECK(std::abs(K(1, 1) - trap) <= 1e-8);
}

TEST_CASE("lti matches quadrature on the unit square") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const double s = U(rng), t = U(rng);
    const Mat K = lti_eval(control_A(), control_B(), s, t);
    worst = std::max(worst, (K - lti_simpson(s, t, 2000)).cwiseAbs().maxCoeff());
    CHECK((K - lti_eval(control_A(), control_B(), t, s).transpose()).cwiseAbs().maxCoeff() <= 1e-14);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("lti rejects negative times") {
  CHECK_THROWS_AS(lti_eval(control_A(), control_B(), -0.1, 0.5), Error);
}

TEST_CASE("gaussian first derivatives at coincidence") {
  const KernelSpec k = KernelSpec::gaussian(1, 1.0);
  Vec x(1);
  x << 0.4;
  const MultiIndex e1 = MultiIndex::unit(1, 0), z(1);
  CHECK(std::abs(k.eval_partial(e1, z, 0, 0, x, x)) <= 1e-15);
  CHECK(k.eval_partial(e1, e1, 0, 0, x, x) == doctest::Approx(1.0));
  // finite differences of K(x, y) in both arguments
  const double h = 1e-5;
  Vec xp = x, xm = x;
  xp[0] += h;
  xm[0] -= h;
  const double fd = (k.eval(xp, xp)(0, 0) - k.eval(xp, xm)(0, 0) - k.eval(xm, xp)(0, 0) + k.eval(xm, xm)(0, 0)) /
                    (4 * h * h);
  CHECK(std::abs(fd - 1.0) <= 1e-4);
}

TEST_CASE("laplacian derivatives are rejected") {
  const KernelSpec k = KernelSpec::laplacian(5.0);
  Vec x(1);
  x << 0.1;
  try {
    k.eval_partial(MultiIndex::unit(1, 0), MultiIndex(1), 0, 0, x, x);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("not differentiable") != std::string::npos);
  }
}

TEST_CASE("derivative order above smoothness is rejected") {
  const KernelSpec k = KernelSpec::gaussian(1, 1.0, 1);
  Vec x(1);
  x << 0.1;
  CHECK_THROWS_AS(k.eval_partial(MultiIndex{2}, MultiIndex{0}, 0, 0, x, x), Error);
  const KernelSpec k2 = KernelSpec::gaussian(1, 1.0);
  CHECK_THROWS_AS(k2.eval_partial(MultiIndex{3}, MultiIndex{0}, 0, 0, x, x), Error);
}

TEST_CASE("decomposable gaussian factorizes") {
  Vec sigma(2);
  sigma << 0.7, 1.3;
  Mat S(2, 2);
  S << 2.0, 0.5, 0.5, 1.0;
  const KernelSpec k = KernelSpec::decomposable_gaussian(sigma, S);
  const KernelSpec scalar = KernelSpec::gaussian(sigma);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N;
  for (int trial = 0; trial < 10; ++trial) {
    Vec x(2), y(2);
    x << N(rng), N(rng);
    y << N(rng), N(rng);
    for (const auto& r1 : orders_upto2(2))
      for (const auto& r2 : orders_upto2(2)) {
        const double base = scalar.eval_partial(r1, r2, 0, 0, x, y);
        for (int q1 = 0; q1 < 2; ++q1)
          for (int q2 = 0; q2 < 2; ++q2)
            CHECK(std::abs(k.eval_partial(r1, r2, q1, q2, x, y) - base * S(q1, q2)) <= 1e-12 * (1 + std::abs(base)));
      }
  }
  Mat bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(KernelSpec::decomposable_gaussian(sigma, bad), Error);
}

TEST_CASE("kernels are symmetric and positive semidefinite") {
  Vec sigma(3);
  sigma << 0.5, 1.0, 2.0;
  Mat S(2, 2);
  S << 1.0, 0.3, 0.3, 0.5;
  const std::vector<KernelSpec> kernels = {KernelSpec::gaussian(sigma), KernelSpec::laplacian(5.0, 3),
                                           KernelSpec::decomposable_gaussian(sigma, S),
                                           KernelSpec::lti_control(control_A(), control_B())};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N;
  for (const auto& k : kernels) {
    const int d = k.input_dim(), Q = k.output_dim();
    std::vector<Vec> xs, cs;
    for (int i = 0; i < 20; ++i) {
      Vec x(d), c(Q);
      for (int j = 0; j < d; ++j) x[j] = U(rng);
      for (int j = 0; j < Q; ++j) c[j] = N(rng);
      xs.push_back(x);
      cs.push_back(c);
    }
    Mat G(20, 20);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) {
        G(i, j) = cs[i].dot(k.eval(xs[i], xs[j]) * cs[j]);
        CHECK((k.eval(xs[i], xs[j]) - k.eval(xs[j], xs[i]).transpose()).cwiseAbs().maxCoeff() <= 1e-13);
      }
    const double scale = G.trace() / 20.0;
    const double mineig = Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (G + G.transpose())).eigenvalues().minCoeff();
    CHECK_MESSAGE(mineig >= -1e-8 * scale, k.kind_name());
  }
}

TEST_CASE("gaussian partials agree with finite differences") {
  // d/dx_i of eval_partial(r1, r2) equals eval_partial(r1 + e_i, r2), likewise in the second argument.
  Vec sigma(2);
  sigma << 0.8, 1.5;
  const KernelSpec k = KernelSpec::gaussian(sigma);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> N;
  const double h = 1e-5;
  double worst = 0.0;
  int checks = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(2), y(2);
    x << N(rng), N(rng);
    y = x + 0.7 * Vec::Random(2);
    for (const auto& r1 : orders_upto2(2))
      for (const auto& r2 : orders_upto2(2))
        for (int i = 0; i < 2; ++i) {
          const MultiIndex e = MultiIndex::unit(2, i);
          Vec xp = x, xm = x, yp = y, ym = y;
          xp[i] += h, xm[i] -= h, yp[i] += h, ym[i] -= h;
          if (r1.order() < 2) {
            const double exact = k.eval_partial(r1 + e, r2, 0, 0, x, y);
            const double fd = (k.eval_partial(r1, r2, 0, 0, xp, y) - k.eval_partial(r1, r2, 0, 0, xm, y)) / (2 * h);
            worst = std::max(worst, std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
            ++checks;
          }
          if (r2.order() < 2) {
            const double exact = k.eval_partial(r1, r2 + e, 0, 0, x, y);
            const double fd = (k.eval_partial(r1, r2, 0, 0, x, yp) - k.eval_partial(r1, r2, 0, 0, x, ym)) / (2 * h);
            worst = std::max(worst, std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
            ++checks;
          }
        }
  }
  CHECK(checks > 1000);
  CHECK(worst <= 1e-4);
}

TEST_CASE("fingerprints distinguish kernels") {
  CHECK(KernelSpec::gaussian(1, 1.0).fingerprint() != KernelSpec::gaussian(1, 2.0).fingerprint());
  CHECK(KernelSpec::gaussian(1, 1.0).fingerprint() == KernelSpec::gaussian(1, 1.0).fingerprint());
  CHECK(KernelSpec::laplacian(5.0).fingerprint() != KernelSpec::gaussian(1, 5.0).fingerprint());
}
