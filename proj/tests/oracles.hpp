#pragma once

// Independent reference computations used only by tests.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double sweep_min(const std::function<double(double)>& f, double lo, double hi, int n) {
  double best = std::numeric_limits<double>::infinity(), arg = lo;
  for (int i = 0; i <= n; ++i) {
    const double u = lo + (hi - lo) * i / n;
    const double v = f(u);
    if (v < best) best = v, arg = u;
  }
  // golden-section polish around the best grid point
  double a = std::max(lo, arg - (hi - lo) / n), b = std::min(hi, arg + (hi - lo) / n);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (f(c) < f(d))
      b = d;
    else
      a = c;
  }
  return std::min(best, f(0.5 * (a + b)));
}

// min 0.5 x'Px + q'x s.t. Gx <= h by enumeration of active sets (P positive definite).
inline std::optional<std::pair<Vec, double>> qp_active_set(const Mat& P, const Vec& q, const Mat& G, const Vec& h) {
  const int n = int(P.rows()), m = int(G.rows());
  std::optional<std::pair<Vec, double>> best;
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i)
      if (mask & (1 << i)) act.push_back(i);
    const int k = int(act.size());
    if (k > n) continue;
    Mat K = Mat::Zero(n + k, n + k);
    Vec r(n + k);
    K.topLeftCorner(n, n) = P;
    r.head(n) = -q;
    for (int j = 0; j < k; ++j) {
      K.block(0, n + j, n, 1) = G.row(act[j]).transpose();
      K.block(n + j, 0, 1, n) = G.row(act[j]);
      r[n + j] = h[act[j]];
    }
    Eigen::FullPivLU<Mat> lu(K);
    if (lu.rank() < n + k) continue;
    const Vec sol = lu.solve(r);
    const Vec x = sol.head(n);
    bool ok = true;
    for (int j = 0; j < k; ++j)
      if (sol[n + j] < -1e-12) ok = false;
    if ((G * x - h).maxCoeff() > 1e-10) ok = false;
    if (!ok) continue;
    const double v = 0.5 * x.dot(P * x) + q.dot(x);
    if (!best || v < best->second) best = std::make_pair(x, v);
  }
  return best;
}

}  // namespace oracle
