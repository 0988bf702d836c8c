#include "shapekernel/tighten.hpp"

#include <cmath>
#include <limits>

#include "shapekernel/error.hpp"

namespace shapekernel {

std::string mode_name(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::discretized:
      return "discretized";
    case ConstraintMode::soc_ball:
      return "soc_ball";
    case ConstraintMode::omega:
      return "omega";
  }
  return "?";
}

void ShapeConstraint::validate(int bias_dim) const {
  const int P = size();
  if (P < 1) throw Error("constraint '" + name + "' has an empty operator");
  if (offset.size() != P) throw Error("constraint '" + name + "': offset size must equal operator size");
  if (bias_map.rows() != P && !(bias_map.size() == 0 && bias_dim == 0))
    throw Error("constraint '" + name + "': bias map needs one row per operator row");
  if (bias_map.size() > 0 && bias_map.cols() != bias_dim)
    throw Error("constraint '" + name + "': bias map column count differs from bias dimension");
  if (region.lo.size() != region.hi.size()) throw Error("constraint '" + name + "': malformed region");
}

namespace {

AffineForm entry_form(const ShapeConstraint& c, const Vec& x, int p1, int p2) {
  AffineForm f;
  const DiffFunctional& D = c.op.entry(p1, p2);
  f.evals.push_back({1.0, Atom{x, D}});
  if (c.shift) f.constant -= apply(D, *c.shift, x);
  if (p1 == p2) {
    f.constant -= c.offset[p1];
    if (c.bias_map.size() > 0) f.bias = c.bias_map.row(p1).transpose();
  }
  return f;
}

void check_anchor(const ShapeConstraint& c, const Vec& x) {
  if (!c.region.contains(x, 1e-12))
    throw Error("constraint '" + c.name + "': anchor point outside the constraint region");
}

void check_pd_size(const ShapeConstraint& c) {
  if (c.size() >= 3)
    throw Error("constraint '" + c.name +
                "': PSD blocks of size 3 or more need a PSD-capable solver; export the program JSON "
                "and add the block there");
}

ConicConstraintRecord make(const ShapeConstraint& c, int ci, int m, auto body) {
  return ConicConstraintRecord{std::move(body), Provenance{ci, m}, c.shift};
}

}  // namespace

std::vector<ConicConstraintRecord> discretize(const ShapeConstraint& c, const std::vector<Vec>& points, int ci) {
  check_pd_size(c);
  std::vector<ConicConstraintRecord> out;
  for (size_t m = 0; m < points.size(); ++m) {
    const Vec& x = points[m];
    check_anchor(c, x);
    if (c.size() == 1) {
      out.push_back(make(c, ci, int(m), LinearRecord{entry_form(c, x, 0, 0), false}));
    } else {
      out.push_back(make(c, ci, int(m), LinearRecord{entry_form(c, x, 0, 0), false}));
      out.push_back(make(c, ci, int(m), LinearRecord{entry_form(c, x, 1, 1), false}));
      out.push_back(make(c, ci, int(m), Rsoc2x2Record{entry_form(c, x, 0, 0), entry_form(c, x, 0, 1),
                                                      entry_form(c, x, 1, 1), 0.0}));
    }
  }
  return out;
}

std::vector<ConicConstraintRecord> tighten_soc(const ShapeConstraint& c, const std::vector<InputBall>& cover,
                                               const std::vector<double>& etas, int ci) {
  check_pd_size(c);
  if (etas.size() != cover.size()) throw Error("constraint '" + c.name + "': one eta per covering element required");
  std::vector<ConicConstraintRecord> out;
  for (size_t m = 0; m < cover.size(); ++m) {
    const Vec& x = cover[m].center;
    check_anchor(c, x);
    const double eta = etas[m];
    if (!(eta >= 0) || !std::isfinite(eta)) throw Error("constraint '" + c.name + "': invalid eta");
    auto diag = [&](int p) -> ConicConstraintRecord {
      if (eta == 0.0) return make(c, ci, int(m), LinearRecord{entry_form(c, x, p, p), false});
      return make(c, ci, int(m), SocBufferRecord{entry_form(c, x, p, p), eta});
    };
    if (c.size() == 1) {
      out.push_back(diag(0));
    } else {
      out.push_back(diag(0));
      out.push_back(diag(1));
      out.push_back(make(c, ci, int(m), Rsoc2x2Record{entry_form(c, x, 0, 0), entry_form(c, x, 0, 1),
                                                      entry_form(c, x, 1, 1), eta}));
    }
  }
  return out;
}

std::vector<ConicConstraintRecord> tighten_omega(const ShapeConstraint& c, const std::vector<OmegaSet>& omegas,
                                                 int ci) {
  if (c.size() != 1) throw Error("constraint '" + c.name + "': omega tightening needs a scalar operator");
  std::vector<ConicConstraintRecord> out;
  for (size_t m = 0; m < omegas.size(); ++m) {
    const OmegaSet& om = omegas[m];
    const bool inactive_half = om.halfspaces.size() == 1 && std::isinf(om.halfspaces[0].offset) &&
                               om.halfspaces[0].offset > 0;
    const size_t nh = inactive_half ? 0 : om.halfspaces.size();
    if (om.balls.size() != 1 || nh > 1) throw Error("general inclusion not implemented");
    const OmegaBall& ball = om.balls[0];
    if (!(ball.radius > 0)) throw Error("omega element radius must be positive");
    AffineForm lhs;
    for (const auto& [coef, atom] : ball.center.terms) {
      lhs.evals.push_back({coef, atom});
      if (c.shift) lhs.constant -= coef * apply(atom.functional, *c.shift, atom.point);
    }
    lhs.constant -= c.offset[0];
    if (c.bias_map.size() > 0) lhs.bias = c.bias_map.row(0).transpose();
    if (nh == 0) {
      out.push_back(make(c, ci, int(m), SocBufferRecord{std::move(lhs), ball.radius}));
      continue;
    }
    OmegaInclusionRecord rec;
    rec.lhs = std::move(lhs);
    rec.center = ball.center;
    rec.radius = ball.radius;
    rec.has_halfspace = true;
    rec.halfspace = om.halfspaces[0];
    out.push_back(make(c, ci, int(m), std::move(rec)));
  }
  return out;
}

Mat slack_matrix(const Model& model, const ShapeConstraint& c, const Vec& x) {
  const int P = c.size();
  Mat M(P, P);
  for (int i = 0; i < P; ++i)
    for (int j = i; j < P; ++j) {
      const DiffFunctional& D = c.op.entry(i, j);
      double v = apply(D, model, x);
      if (c.shift) v -= apply(D, *c.shift, x);
      M(i, j) = M(j, i) = v;
    }
  for (int p = 0; p < P; ++p) {
    M(p, p) -= c.offset[p];
    if (c.bias_map.size() > 0 && model.bias().size() == c.bias_map.cols()) M(p, p) += c.bias_map.row(p).dot(model.bias());
  }
  return M;
}

double min_slack(const Model& model, const ShapeConstraint& c, const Vec& x) {
  const Mat M = slack_matrix(model, c, x);
  if (M.rows() == 1) return M(0, 0);
  if (M.rows() == 2) {
    const double tr = 0.5 * (M(0, 0) + M(1, 1));
    const double df = 0.5 * (M(0, 0) - M(1, 1));
    return tr - std::sqrt(df * df + M(0, 1) * M(0, 1));
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::vector<Vec> box_grid(const Box& box, int grid_res) {
  if (grid_res < 2) throw Error("grid resolution must be at least 2");
  const int d = box.dim();
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (grid_res - 1);
    out.push_back(std::move(x));
    int ax = 0;
    while (ax < d && ++idx[ax] == grid_res) idx[ax++] = 0;
    if (ax == d) break;
  }
  return out;
}

VerifyReport verify_pointwise(const Model& model, const ShapeConstraint& c, int grid_res) {
  VerifyReport rep;
  rep.min_eig = std::numeric_limits<double>::infinity();
  for (const auto& x : box_grid(c.region, grid_res)) {
    const double s = min_slack(model, c, x);
    ++rep.points;
    if (s < rep.min_eig) {
      rep.min_eig = s;
      rep.worst_point = x;
    }
  }
  rep.max_violation = std::max(0.0, -rep.min_eig);
  return rep;
}

}  // namespace shapekernel
