#include "shapekernel/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shapekernel/error.hpp"

namespace shapekernel {

std::string cone_kind_name(ConeKind k) {
  switch (k) {
    case ConeKind::zero:
      return "zero";
    case ConeKind::nonneg:
      return "nonneg";
    case ConeKind::soc:
      return "soc";
    case ConeKind::rsoc:
      return "rsoc";
  }
  return "?";
}

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::unbounded:
      return "unbounded";
    case SolveStatus::max_iter:
      return "max_iter";
  }
  return "?";
}

int ConeProgram::add_variables(int count, std::string name) {
  if (count < 0) throw Error("negative variable count");
  const int offset = num_vars_;
  var_blocks_.push_back({std::move(name), offset, count});
  num_vars_ += count;
  Mat P2 = Mat::Zero(num_vars_, num_vars_);
  if (P.size() > 0) P2.topLeftCorner(P.rows(), P.cols()) = P;
  P = std::move(P2);
  Vec q2 = Vec::Zero(num_vars_);
  if (q.size() > 0) q2.head(q.size()) = q;
  q = std::move(q2);
  return offset;
}

int ConeProgram::add_block(ConeKind kind, const std::vector<SparseRow>& rows, const std::vector<double>& constants,
                           std::string tag) {
  if (rows.size() != constants.size()) throw Error("cone block row/constant count mismatch (" + tag + ")");
  const int dim = static_cast<int>(rows.size());
  if (dim == 0) throw Error("empty cone block (" + tag + ")");
  if (kind == ConeKind::soc && dim < 1) throw Error("second-order cone needs dimension >= 1 (" + tag + ")");
  if (kind == ConeKind::rsoc && dim < 2) throw Error("rotated cone needs dimension >= 2 (" + tag + ")");
  for (const auto& r : rows)
    for (const auto& [j, v] : r) {
      if (j < 0 || j >= num_vars_) throw Error("cone row references unknown variable (" + tag + ")");
      if (!std::isfinite(v)) throw Error("non-finite coefficient in cone row (" + tag + ")");
    }
  const int offset = num_rows();
  for (int i = 0; i < dim; ++i) {
    SparseRow r;
    for (const auto& e : rows[i])
      if (e.second != 0.0) r.push_back(e);
    std::sort(r.begin(), r.end());
    SparseRow merged;
    for (const auto& e : r) {
      if (!merged.empty() && merged.back().first == e.first)
        merged.back().second += e.second;
      else
        merged.push_back(e);
    }
    rows_.push_back(std::move(merged));
    constants_.push_back(constants[i]);
  }
  blocks_.push_back({kind, offset, dim, std::move(tag)});
  return static_cast<int>(blocks_.size()) - 1;
}

int ConeProgram::add_block(ConeKind kind, const Mat& coeffs, const Vec& constants, std::string tag) {
  if (coeffs.cols() != num_vars_) throw Error("cone block column count differs from variable count (" + tag + ")");
  std::vector<SparseRow> rows(coeffs.rows());
  for (Eigen::Index i = 0; i < coeffs.rows(); ++i)
    for (Eigen::Index j = 0; j < coeffs.cols(); ++j)
      if (coeffs(i, j) != 0.0) rows[i].push_back({int(j), coeffs(i, j)});
  return add_block(kind, rows, std::vector<double>(constants.data(), constants.data() + constants.size()),
                   std::move(tag));
}

Vec ConeProgram::row_values(const Vec& x) const {
  Vec out(num_rows());
  for (int i = 0; i < num_rows(); ++i) {
    double s = constants_[i];
    for (const auto& [j, v] : rows_[i]) s += v * x[j];
    out[i] = s;
  }
  return out;
}

Mat ConeProgram::dense_coeffs() const {
  Mat C = Mat::Zero(num_rows(), num_vars_);
  for (int i = 0; i < num_rows(); ++i)
    for (const auto& [j, v] : rows_[i]) C(i, j) = v;
  return C;
}

double ConeProgram::objective(const Vec& x) const { return 0.5 * x.dot(P * x) + q.dot(x) + objective_constant; }

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr int kLargeCone = 24;

// Inequality block in solver form: s = h - G x, G stored on its column support.
struct Block {
  bool soc = false;
  bool rotated = false;
  int offset = 0;  // into the stacked inequality vector
  int dim = 0;
  int program_row = 0;
  std::vector<int> support;
  Mat G;  // dim x |support|
  Vec h;
  Mat gtg;  // support Gram for large cones
  // scaling
  Vec d;        // nonneg: W = diag(d)
  double eta = 1.0;
  double a = 1.0;  // wbar = (a, qv)
  Vec qv;
};

struct Kkt {
  int n = 0, p = 0, m = 0;
  Mat A;
  Vec b;
  std::vector<Block> blocks;
  std::vector<int> eq_rows;
};

double soc_residual(const double* x, int dim) {
  double t = 0.0;
  for (int i = 1; i < dim; ++i) t += x[i] * x[i];
  return x[0] - std::sqrt(t);
}

void apply_rot(double* v) {
  const double u = v[0], w = v[1];
  v[0] = kInvSqrt2 * (u + w);
  v[1] = kInvSqrt2 * (u - w);
}

Vec mul_G(const Kkt& k, const Vec& x) {
  Vec out(k.m);
  for (const auto& bl : k.blocks) {
    Vec xs(bl.support.size());
    for (size_t j = 0; j < bl.support.size(); ++j) xs[j] = x[bl.support[j]];
    out.segment(bl.offset, bl.dim) = bl.G * xs;
  }
  return out;
}

Vec mul_Gt(const Kkt& k, const Vec& z) {
  Vec out = Vec::Zero(k.n);
  for (const auto& bl : k.blocks) {
    const Vec t = bl.G.transpose() * z.segment(bl.offset, bl.dim);
    for (size_t j = 0; j < bl.support.size(); ++j) out[bl.support[j]] += t[j];
  }
  return out;
}

// wbar v for the unit-determinant hyperbolic scaling vector (a, q).
void wbar_apply(const Block& bl, const double* v, double* out) {
  const int n = bl.dim - 1;
  Eigen::Map<const Vec> v1(v + 1, n);
  Eigen::Map<Vec> o1(out + 1, n);
  const double qv1 = bl.qv.dot(v1);
  const double v0 = v[0];
  out[0] = bl.a * v0 + qv1;
  o1 = v1 + (v0 + qv1 / (1.0 + bl.a)) * bl.qv;
}

// out = W v  (inverse = true: W^{-1} v)
void apply_W(const Kkt& k, const Vec& v, Vec& out, bool inverse) {
  out.resize(k.m);
  for (const auto& bl : k.blocks) {
    if (!bl.soc) {
      for (int i = 0; i < bl.dim; ++i)
        out[bl.offset + i] = inverse ? v[bl.offset + i] / bl.d[i] : v[bl.offset + i] * bl.d[i];
      continue;
    }
    if (!inverse) {
      wbar_apply(bl, v.data() + bl.offset, out.data() + bl.offset);
      out.segment(bl.offset, bl.dim) *= bl.eta;
    } else {
      Vec t = v.segment(bl.offset, bl.dim);
      t.tail(bl.dim - 1) *= -1.0;
      wbar_apply(bl, t.data(), out.data() + bl.offset);
      out.segment(bl.offset + 1, bl.dim - 1) *= -1.0;
      out.segment(bl.offset, bl.dim) /= bl.eta;
    }
  }
}

void apply_W2(const Kkt& k, const Vec& v, Vec& out, bool inverse) {
  Vec t;
  apply_W(k, v, t, inverse);
  apply_W(k, t, out, inverse);
}

// Jordan product and inverse product.
Vec jordan(const Kkt& k, const Vec& x, const Vec& y) {
  Vec out(k.m);
  for (const auto& bl : k.blocks) {
    if (!bl.soc) {
      for (int i = 0; i < bl.dim; ++i) out[bl.offset + i] = x[bl.offset + i] * y[bl.offset + i];
      continue;
    }
    const auto xs = x.segment(bl.offset, bl.dim);
    const auto ys = y.segment(bl.offset, bl.dim);
    out[bl.offset] = xs.dot(ys);
    out.segment(bl.offset + 1, bl.dim - 1) = xs[0] * ys.tail(bl.dim - 1) + ys[0] * xs.tail(bl.dim - 1);
  }
  return out;
}

// Solve lambda o w = v.
Vec jordan_div(const Kkt& k, const Vec& lam, const Vec& v) {
  Vec out(k.m);
  for (const auto& bl : k.blocks) {
    if (!bl.soc) {
      for (int i = 0; i < bl.dim; ++i) out[bl.offset + i] = v[bl.offset + i] / lam[bl.offset + i];
      continue;
    }
    const int n = bl.dim - 1;
    const double l0 = lam[bl.offset];
    const auto l1 = lam.segment(bl.offset + 1, n);
    const double v0 = v[bl.offset];
    const auto v1 = v.segment(bl.offset + 1, n);
    const double det = l0 * l0 - l1.squaredNorm();
    const double w0 = (l0 * v0 - l1.dot(v1)) / det;
    out[bl.offset] = w0;
    out.segment(bl.offset + 1, n) = (v1 - w0 * l1) / l0;
  }
  return out;
}

Vec identity_e(const Kkt& k) {
  Vec e = Vec::Zero(k.m);
  for (const auto& bl : k.blocks) {
    if (bl.soc)
      e[bl.offset] = 1.0;
    else
      e.segment(bl.offset, bl.dim).setOnes();
  }
  return e;
}

// Largest alpha with x + alpha d in the cone (infinity if unbounded).
double max_step(const Kkt& k, const Vec& x, const Vec& d) {
  double amax = std::numeric_limits<double>::infinity();
  for (const auto& bl : k.blocks) {
    if (!bl.soc) {
      for (int i = 0; i < bl.dim; ++i) {
        const double di = d[bl.offset + i];
        if (di < 0) amax = std::min(amax, -x[bl.offset + i] / di);
      }
      continue;
    }
    const int n = bl.dim - 1;
    const double x0 = x[bl.offset], d0 = d[bl.offset];
    const auto x1 = x.segment(bl.offset + 1, n);
    const auto d1 = d.segment(bl.offset + 1, n);
    const double a = d0 * d0 - d1.squaredNorm();
    const double b = x0 * d0 - x1.dot(d1);
    const double c = std::max(x0 * x0 - x1.squaredNorm(), 0.0);
    const double disc = b * b - a * c;
    double alpha = std::numeric_limits<double>::infinity();
    if (a < 0 || (b < 0 && disc >= 0)) {
      const double den = -b + std::sqrt(std::max(disc, 0.0));
      alpha = den > 0 ? c / den : 0.0;
    }
    // the linear part can be hit first when d0 < 0 and the quadratic has no root
    if (d0 < 0) alpha = std::min(alpha, -x0 / d0);
    amax = std::min(amax, alpha);
  }
  return amax;
}

// min over blocks of the cone "eigenvalue" used for initial shifts.
double min_cone_value(const Kkt& k, const Vec& x) {
  double mn = std::numeric_limits<double>::infinity();
  for (const auto& bl : k.blocks) {
    if (!bl.soc)
      mn = std::min(mn, x.segment(bl.offset, bl.dim).minCoeff());
    else
      mn = std::min(mn, soc_residual(x.data() + bl.offset, bl.dim));
  }
  return mn;
}

void compute_scaling(Kkt& k, const Vec& s, const Vec& z) {
  for (auto& bl : k.blocks) {
    if (!bl.soc) {
      bl.d = (s.segment(bl.offset, bl.dim).array() / z.segment(bl.offset, bl.dim).array()).sqrt();
      continue;
    }
    const int n = bl.dim - 1;
    const double s0 = s[bl.offset], z0 = z[bl.offset];
    const auto s1 = s.segment(bl.offset + 1, n);
    const auto z1 = z.segment(bl.offset + 1, n);
    const double sres = std::max((s0 - s1.norm()) * (s0 + s1.norm()), 1e-300);
    const double zres = std::max((z0 - z1.norm()) * (z0 + z1.norm()), 1e-300);
    const double sn = std::sqrt(sres), zn = std::sqrt(zres);
    const double sb0 = s0 / sn, zb0 = z0 / zn;
    const Vec sb1 = s1 / sn, zb1 = z1 / zn;
    const double gamma = std::sqrt(0.5 * (1.0 + sb0 * zb0 + sb1.dot(zb1)));
    bl.eta = std::sqrt(sn / zn);
    bl.a = (sb0 + zb0) / (2.0 * gamma);
    bl.qv = (sb1 - zb1) / (2.0 * gamma);
  }
}

class KktSolver {
 public:
  KktSolver(const Kkt& k, const Mat& P) : k_(k), P_(P) {
    size_t small_rows = 0;
    for (const auto& bl : k.blocks)
      if (!bl.soc || bl.dim < kLargeCone) small_rows += bl.dim;
    scaled_.resize(Eigen::Index(small_rows), k.n);
  }

  bool factor() {
    const int n = k_.n;
    H_ = P_;
    scaled_.setZero();
    Eigen::Index r = 0;
    for (const auto& bl : k_.blocks) {
      if (bl.soc && bl.dim >= kLargeCone) {
        const int ns = int(bl.support.size());
        // u = J wbar
        Vec u(bl.dim);
        u[0] = bl.a;
        u.tail(bl.dim - 1) = -bl.qv;
        const Vec v = bl.G.transpose() * u;
        const Vec g0 = bl.G.row(0).transpose();
        const double c = 1.0 / (bl.eta * bl.eta);
        for (int i = 0; i < ns; ++i)
          for (int j = 0; j < ns; ++j)
            H_(bl.support[i], bl.support[j]) += c * (bl.gtg(i, j) - 2.0 * g0[i] * g0[j] + 2.0 * v[i] * v[j]);
        continue;
      }
      if (!bl.soc) {
        for (int i = 0; i < bl.dim; ++i, ++r)
          for (size_t j = 0; j < bl.support.size(); ++j) scaled_(r, bl.support[j]) = bl.G(i, Eigen::Index(j)) / bl.d[i];
        continue;
      }
      // W^{-1} G = (1/eta) J wbar J G, column by column on the support
      Vec col(bl.dim), out(bl.dim);
      for (size_t j = 0; j < bl.support.size(); ++j) {
        col = bl.G.col(Eigen::Index(j));
        col.tail(bl.dim - 1) *= -1.0;
        wbar_apply(bl, col.data(), out.data());
        out.tail(bl.dim - 1) *= -1.0;
        for (int i = 0; i < bl.dim; ++i) scaled_(r + i, bl.support[j]) = out[i] / bl.eta;
      }
      r += bl.dim;
    }
    if (scaled_.rows() > 0) H_.selfadjointView<Eigen::Lower>().rankUpdate(scaled_.transpose());
    H_ = H_.selfadjointView<Eigen::Lower>();
    const double scale = std::max(1.0, H_.diagonal().cwiseAbs().maxCoeff());
    for (double reg = 1e-13; reg < 1e-3; reg *= 100.0) {
      Mat Hr = H_;
      Hr.diagonal().array() += reg * scale;
      llt_.compute(Hr);
      if (llt_.info() != Eigen::Success) continue;
      if (k_.p > 0) {
        HinvAt_ = llt_.solve(k_.A.transpose());
        Mat S = k_.A * HinvAt_;
        const double ss = std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
        S.diagonal().array() += 1e-14 * ss;
        schur_.compute(S);
        if (schur_.info() != Eigen::Success) continue;
      }
      (void)n;
      return true;
    }
    return false;
  }

  // Solves [P A' G'; A 0 0; G 0 -W^2] (dx, dy, dz) = (rx, ry, rz).
  void solve(const Vec& rx, const Vec& ry, const Vec& rz, Vec& dx, Vec& dy, Vec& dz) const {
    solve_once(rx, ry, rz, dx, dy, dz);
    Vec ex, ey, ez;
    residual(rx, ry, rz, dx, dy, dz, ex, ey, ez);
    double err = resid_norm(ex, ey, ez);
    for (int it = 0; it < 4 && err > 0; ++it) {
      Vec cx, cy, cz;
      solve_once(ex, ey, ez, cx, cy, cz);
      Vec nx = dx + cx, nz = dz + cz;
      Vec ny = k_.p > 0 ? Vec(dy + cy) : dy;
      Vec fx, fy, fz;
      residual(rx, ry, rz, nx, ny, nz, fx, fy, fz);
      const double nerr = resid_norm(fx, fy, fz);
      if (!(nerr < err)) break;
      dx = std::move(nx), dy = std::move(ny), dz = std::move(nz);
      ex = std::move(fx), ey = std::move(fy), ez = std::move(fz);
      if (nerr > 0.5 * err) break;
      err = nerr;
    }
  }

 private:
  static double resid_norm(const Vec& a, const Vec& b, const Vec& c) {
    return std::sqrt(a.squaredNorm() + b.squaredNorm() + c.squaredNorm());
  }

  void residual(const Vec& rx, const Vec& ry, const Vec& rz, const Vec& dx, const Vec& dy, const Vec& dz, Vec& ex,
                Vec& ey, Vec& ez) const {
    ex = rx - P_ * dx - mul_Gt(k_, dz);
    if (k_.p > 0) ex -= k_.A.transpose() * dy;
    ey = k_.p > 0 ? Vec(ry - k_.A * dx) : Vec();
    Vec w2dz;
    apply_W2(k_, dz, w2dz, false);
    ez = rz - mul_G(k_, dx) + w2dz;
  }

  void solve_once(const Vec& rx, const Vec& ry, const Vec& rz, Vec& dx, Vec& dy, Vec& dz) const {
    Vec t;
    apply_W2(k_, rz, t, true);
    const Vec rhs = rx + mul_Gt(k_, t);
    Vec hr = llt_.solve(rhs);
    if (k_.p > 0) {
      dy = schur_.solve(k_.A * hr - ry);
      dx = hr - HinvAt_ * dy;
    } else {
      dy = Vec();
      dx = hr;
    }
    const Vec gdx = mul_G(k_, dx) - rz;
    apply_W2(k_, gdx, dz, true);
  }

  const Kkt& k_;
  const Mat& P_;
  Mat H_;
  Mat scaled_;
  Eigen::LLT<Mat> llt_;
  Mat HinvAt_;
  Eigen::LLT<Mat> schur_;
};

void shift_into_cone(const Kkt& k, Vec& x) {
  const double nrm = std::max(1.0, x.norm());
  const double t = -min_cone_value(k, x);
  if (t >= -1e-8 * nrm) x += (1.0 + t) * identity_e(k);
}

}  // namespace

Solution solve(const ConeProgram& program, const SolverSettings& settings, const Vec* warm_start) {
  const int n = program.num_vars();
  if (n == 0) throw Error("cone program has no variables");
  if (settings.feas_tol <= 0 || settings.gap_tol <= 0) throw Error("solver tolerances must be positive");
  if (program.P.rows() != n || program.q.size() != n) throw Error("objective size does not match variable count");

  Kkt k;
  k.n = n;
  // Split zero-cone rows into A x = b and the rest into cone blocks (s = h - G x).
  std::vector<const ConeBlock*> eqb;
  for (const auto& cb : program.blocks())
    if (cb.kind == ConeKind::zero) eqb.push_back(&cb);
  for (const auto* cb : eqb) k.p += cb->dim;
  k.A = Mat::Zero(k.p, n);
  k.b = Vec::Zero(k.p);
  {
    int r = 0;
    for (const auto* cb : eqb)
      for (int i = 0; i < cb->dim; ++i, ++r) {
        const int pr = cb->row_offset + i;
        for (const auto& [j, v] : program.row(pr)) k.A(r, j) = v;
        k.b[r] = -program.row_constant(pr);
        k.eq_rows.push_back(pr);
      }
  }
  for (const auto& cb : program.blocks()) {
    if (cb.kind == ConeKind::zero) continue;
    Block bl;
    bl.soc = cb.kind == ConeKind::soc || cb.kind == ConeKind::rsoc;
    bl.rotated = cb.kind == ConeKind::rsoc;
    bl.offset = k.m;
    bl.dim = cb.dim;
    bl.program_row = cb.row_offset;
    std::vector<int> cols;
    for (int i = 0; i < cb.dim; ++i)
      for (const auto& e : program.row(cb.row_offset + i)) cols.push_back(e.first);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    bl.support = cols;
    bl.G = Mat::Zero(cb.dim, Eigen::Index(cols.size()));
    bl.h.resize(cb.dim);
    for (int i = 0; i < cb.dim; ++i) {
      for (const auto& [j, v] : program.row(cb.row_offset + i)) {
        const auto pos = std::lower_bound(cols.begin(), cols.end(), j) - cols.begin();
        bl.G(i, pos) = -v;
      }
      bl.h[i] = program.row_constant(cb.row_offset + i);
    }
    if (bl.rotated) {
      for (Eigen::Index j = 0; j < bl.G.cols(); ++j) {
        double c[2] = {bl.G(0, j), bl.G(1, j)};
        apply_rot(c);
        bl.G(0, j) = c[0];
        bl.G(1, j) = c[1];
      }
      apply_rot(bl.h.data());
    }
    if (bl.soc && bl.dim >= kLargeCone) bl.gtg = bl.G.transpose() * bl.G;
    k.m += cb.dim;
    k.blocks.push_back(std::move(bl));
  }
  Vec h(k.m);
  for (const auto& bl : k.blocks) h.segment(bl.offset, bl.dim) = bl.h;

  const Mat& P = program.P;
  const Vec& q = program.q;
  Solution sol;

  const double resx0 = std::max(1.0, q.norm());
  const double resy0 = std::max(1.0, k.b.norm());
  const double resz0 = std::max(1.0, h.norm());

  Vec x, y = Vec::Zero(k.p), z = Vec::Zero(k.m), s = Vec::Zero(k.m);

  auto finish = [&](SolveStatus st) {
    sol.status = st;
    sol.x = x;
    sol.objective = program.objective(x);
    sol.slack = program.row_values(x);
    sol.dual = Vec::Zero(program.num_rows());
    for (int r = 0; r < k.p; ++r) sol.dual[k.eq_rows[r]] = -y[r];
    for (const auto& bl : k.blocks) {
      Vec zz = z.segment(bl.offset, bl.dim);
      if (bl.rotated) apply_rot(zz.data());
      sol.dual.segment(bl.program_row, bl.dim) = zz;
    }
    return sol;
  };

  // Initial point: W = I.
  for (auto& bl : k.blocks) {
    if (bl.soc) {
      bl.eta = 1.0;
      bl.a = 1.0;
      bl.qv = Vec::Zero(bl.dim - 1);
    } else {
      bl.d = Vec::Ones(bl.dim);
    }
  }
  KktSolver kkt(k, P);
  if (!kkt.factor()) throw Error("KKT system singular at the initial point (check that the problem is bounded)");
  {
    Vec dx, dy, dz;
    kkt.solve(-q, k.b, h, dx, dy, dz);
    x = dx;
    y = dy;
    if (k.m > 0) {
      s = -dz;
      z = dz;
    }
  }
  if (warm_start != nullptr && warm_start->size() == n && k.m > 0) {
    x = *warm_start;
    s = h - mul_G(k, x);
  }
  if (k.m == 0) {
    sol.iterations = 0;
    const Vec rx = P * x + q + (k.p > 0 ? Vec(k.A.transpose() * y) : Vec::Zero(n));
    sol.dual_residual = rx.norm() / resx0;
    sol.primal_residual = k.p > 0 ? (k.A * x - k.b).norm() / resy0 : 0.0;
    return finish(SolveStatus::optimal);
  }
  shift_into_cone(k, s);
  shift_into_cone(k, z);

  const Vec e = identity_e(k);
  int m_deg = 0;
  for (const auto& bl : k.blocks) m_deg += bl.soc ? 1 : bl.dim;

  bool converged = false;
  int polish = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  Vec bx, by, bz, bs;
  Solution best_stats;
  auto save = [&](double g) {
    best_gap = g;
    bx = x, by = y, bz = z, bs = s;
    best_stats = sol;
  };
  // best iterate seen before convergence, by worst tolerance ratio
  double best_merit = std::numeric_limits<double>::infinity();
  Vec ux, uy, uz, us;
  Solution unconv_stats;
  auto restore = [&]() {
    x = bx, y = by, z = bz, s = bs;
    sol.iterations = best_stats.iterations;
    sol.primal_residual = best_stats.primal_residual;
    sol.dual_residual = best_stats.dual_residual;
    sol.gap = best_stats.gap;
  };

  for (int iter = 0; iter <= settings.max_iter; ++iter) {
    const Vec Gx = mul_G(k, x);
    const Vec Gtz = mul_Gt(k, z);
    const Vec Px = P * x;
    Vec rx = Px + q + Gtz;
    Vec ry;
    if (k.p > 0) {
      rx += k.A.transpose() * y;
      ry = k.A * x - k.b;
    } else {
      ry = Vec();
    }
    const Vec rz = Gx + s - h;
    const double gap = s.dot(z);
    const double pcost = 0.5 * x.dot(Px) + q.dot(x);
    const double dcost = pcost + (k.p > 0 ? y.dot(ry) : 0.0) + z.dot(rz) - gap;
    const double pres = std::max(k.p > 0 ? ry.norm() / resy0 : 0.0, rz.norm() / resz0);
    const double dres = rx.norm() / resx0;
    const double relgap = gap / std::max(1.0, std::abs(pcost));
    sol.iterations = iter;
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.gap = gap;

    const bool ok = pres <= settings.feas_tol && dres <= settings.feas_tol && relgap <= settings.gap_tol;
    const double merit = std::max({pres / settings.feas_tol, dres / settings.feas_tol, relgap / settings.gap_tol});
    if (!converged && merit < best_merit && std::isfinite(merit)) {
      best_merit = merit;
      ux = x, uy = y, uz = z, us = s;
      unconv_stats = sol;
    }
    if (converged) {
      // polish steps are kept only while they stay within tolerance and reduce the gap
      if (!ok || !(gap < 0.5 * best_gap)) {
        restore();
        return finish(SolveStatus::optimal);
      }
      save(gap);
      if (++polish > settings.polish_iter || gap <= 1e-15 * std::max(1.0, std::abs(pcost))) return finish(SolveStatus::optimal);
    } else if (ok) {
      converged = true;
      save(gap);
      if (settings.polish_iter == 0) return finish(SolveStatus::optimal);
    }

    // certificates
    const double hz = h.dot(z) + (k.p > 0 ? k.b.dot(y) : 0.0);
    if (hz < 0 && pres > settings.feas_tol) {
      Vec farkas = Gtz;
      if (k.p > 0) farkas += k.A.transpose() * y;
      if (farkas.norm() <= 1e-9 * -hz && z.norm() > 1e3 * std::max(1.0, std::abs(pcost)))
        return finish(SolveStatus::infeasible);
    }
    const double qx = q.dot(x);
    if (qx < 0 && dres > settings.feas_tol) {
      const double ax = k.p > 0 ? (k.A * x).norm() : 0.0;
      if (Px.norm() <= 1e-9 * -qx && ax <= 1e-9 * -qx && (Gx + s).norm() <= 1e-9 * -qx && x.norm() > 1e6)
        return finish(SolveStatus::unbounded);
    }
    if (iter == settings.max_iter) break;

    compute_scaling(k, s, z);
    if (!kkt.factor()) {
      if (converged) {
        restore();
        return finish(SolveStatus::optimal);
      }
      break;
    }
    Vec lambda;
    apply_W(k, z, lambda, false);

    // affine direction
    Vec dx, dy, dz;
    const Vec rhs_x = -rx;
    const Vec rhs_y = k.p > 0 ? Vec(-ry) : Vec();
    kkt.solve(rhs_x, rhs_y, -rz + s, dx, dy, dz);
    Vec w2dz;
    apply_W2(k, dz, w2dz, false);
    Vec ds = -s - w2dz;
    const double amax_a = std::min(max_step(k, s, ds), max_step(k, z, dz));
    const double alpha_a = std::min(1.0, amax_a);
    const double sigma = std::pow(1.0 - alpha_a, 3.0);
    const double mu = gap / m_deg;

    // combined direction
    Vec wids, wdz;
    apply_W(k, ds, wids, true);
    apply_W(k, dz, wdz, false);
    const Vec rc = -jordan(k, lambda, lambda) + sigma * mu * e - jordan(k, wids, wdz);
    const Vec dsl = jordan_div(k, lambda, rc);
    Vec wdsl;
    apply_W(k, dsl, wdsl, false);
    kkt.solve(rhs_x, rhs_y, -rz - wdsl, dx, dy, dz);
    Vec wdz2;
    apply_W(k, dz, wdz2, false);
    Vec tmp = dsl - wdz2;
    apply_W(k, tmp, ds, false);

    const double amax = std::min(max_step(k, s, ds), max_step(k, z, dz));
    const double alpha = std::min(1.0, settings.step_fraction * amax);
    if (settings.trace) sol.trace.push_back({iter, pcost, dcost, gap, pres, dres, alpha});
    if (!(alpha > 1e-12) || !dx.allFinite() || !ds.allFinite() || !dz.allFinite() ||
        (k.p > 0 && !dy.allFinite()))
      break;
    x += alpha * dx;
    if (k.p > 0) y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
  }
  if (converged) {
    restore();
    return finish(SolveStatus::optimal);
  }
  if (std::isfinite(best_merit)) {
    x = ux, y = uy, z = uz, s = us;
    sol.iterations = unconv_stats.iterations;
    sol.primal_residual = unconv_stats.primal_residual;
    sol.dual_residual = unconv_stats.dual_residual;
    sol.gap = unconv_stats.gap;
  }
  return finish(SolveStatus::max_iter);
}

KktReport kkt_residuals(const ConeProgram& program, const Solution& sol) {
  KktReport rep;
  const Vec& x = sol.x;
  const Vec slack = program.row_values(x);
  const Mat C = program.dense_coeffs();
  const Vec stat = program.P * x + program.q - C.transpose() * sol.dual;
  rep.stationarity = stat.norm() / std::max(1.0, program.q.norm());
  Vec c(program.num_rows());
  for (int i = 0; i < program.num_rows(); ++i) c[i] = program.row_constant(i);
  const double cn = std::max(1.0, c.norm());
  double viol2 = 0.0, cviol = 0.0, comp = 0.0;
  for (const auto& b : program.blocks()) {
    const Vec sv = slack.segment(b.row_offset, b.dim);
    const Vec zv = sol.dual.segment(b.row_offset, b.dim);
    switch (b.kind) {
      case ConeKind::zero:
        viol2 += sv.squaredNorm();
        break;
      case ConeKind::nonneg:
        viol2 += sv.cwiseMin(0.0).squaredNorm();
        cviol = std::max(cviol, std::max(0.0, -zv.minCoeff()));
        comp += sv.dot(zv);
        break;
      case ConeKind::soc: {
        const double r = sv[0] - sv.tail(b.dim - 1).norm();
        viol2 += std::pow(std::min(0.0, r), 2);
        cviol = std::max(cviol, std::max(0.0, -(zv[0] - zv.tail(b.dim - 1).norm())));
        comp += sv.dot(zv);
        break;
      }
      case ConeKind::rsoc: {
        auto rres = [&](const Vec& v) {
          const double u = v[0], w = v[1];
          const double a = kInvSqrt2 * (u + w);
          return a - std::sqrt(std::pow(kInvSqrt2 * (u - w), 2) + v.tail(b.dim - 2).squaredNorm());
        };
        viol2 += std::pow(std::min(0.0, rres(sv)), 2);
        cviol = std::max(cviol, std::max(0.0, -rres(zv)));
        comp += sv.dot(zv);
        break;
      }
    }
  }
  rep.primal_feasibility = std::sqrt(viol2) / cn;
  rep.cone_violation = cviol;
  rep.complementarity = std::abs(comp) / std::max(1.0, std::abs(program.objective(x) - program.objective_constant));
  return rep;
}

}  // namespace shapekernel
