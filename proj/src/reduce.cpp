#include "shapekernel/reduce.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "shapekernel/error.hpp"

namespace shapekernel {

void ProblemSpec::validate() const {
  if (bias_dim < 0) throw Error("bias dimension must be non-negative");
  auto check_bias = [&](const Vec& b, const char* what) {
    if (b.size() != 0 && b.size() != bias_dim)
      throw Error(std::string(what) + ": bias coefficient length differs from bias dimension");
  };
  for (const auto& o : observations) {
    check_bias(o.bias, "observation");
    if (!(o.weight >= 0)) throw Error("observation weights must be non-negative");
  }
  for (const auto& e : equalities) check_bias(e.bias, "interpolation");
  if (loss == LossKind::none && regularizer.kind == RegularizerKind::none)
    throw Error("problem needs a loss or a regularizer");
  if (loss == LossKind::squared && observations.empty()) throw Error("squared loss without observations");
  if (bias_set == BiasSet::box && (bias_lo.size() != bias_dim || bias_hi.size() != bias_dim))
    throw Error("bias box bounds must have the bias dimension");
  if (regularizer.kind == RegularizerKind::norm_bound && !(regularizer.bound > 0))
    throw Error("norm bound must be positive");
  if (regularizer.kind != RegularizerKind::none && regularizer.kind != RegularizerKind::norm_bound &&
      !(regularizer.weight >= 0))
    throw Error("regularizer weight must be non-negative");
  for (const auto& c : constraints) c.validate(bias_dim);
}

std::optional<double> ProblemSpec::strong_convexity_f() const {
  if (regularizer.kind == RegularizerKind::norm_squared && regularizer.weight > 0) return 2.0 * regularizer.weight;
  return std::nullopt;
}

namespace {

void add_form_atoms(const AffineForm& f, auto&& push) {
  for (const auto& [c, a] : f.evals) push(a);
}

struct AtomIndex {
  std::unordered_map<std::string, int> index;
  int find(const Atom& a) const {
    auto it = index.find(atom_key(a));
    if (it == index.end()) throw Error("atom missing from the basis: " + atom_key(a));
    return it->second;
  }
};

}  // namespace

std::vector<Atom> collect_atoms(const ProblemSpec& p, const std::vector<ConicConstraintRecord>& records) {
  std::vector<Atom> out;
  std::set<std::string> seen;
  auto push = [&](const Atom& a) {
    if (seen.insert(atom_key(a)).second) out.push_back(a);
  };
  for (const auto& o : p.observations) push(o.atom);
  for (const auto& e : p.equalities) push(e.atom);
  for (const auto& r : records) {
    std::visit(
        [&](const auto& body) {
          using T = std::decay_t<decltype(body)>;
          if constexpr (std::is_same_v<T, LinearRecord> || std::is_same_v<T, SocBufferRecord>) {
            add_form_atoms(body.expr, push);
          } else if constexpr (std::is_same_v<T, Rsoc2x2Record>) {
            add_form_atoms(body.m11, push);
            add_form_atoms(body.m12, push);
            add_form_atoms(body.m22, push);
          } else {
            add_form_atoms(body.lhs, push);
            for (const auto& [c, a] : body.center.terms) push(a);
            if (body.has_halfspace)
              for (const auto& [c, a] : body.halfspace.normal.terms) push(a);
          }
        },
        r.body);
  }
  for (const auto& r : records)
    if (r.shift)
      for (const auto& a : r.shift->basis()) push(a);
  return out;
}

AssembledProblem assemble(const ProblemSpec& p, std::vector<Atom> basis, std::vector<ConicConstraintRecord> records) {
  p.validate();
  AssembledProblem out{ConeProgram{}, std::move(basis), GramFactor{}, Mat(), 0, -1, p.bias_dim, {}, std::move(records),
                       {}, {}, p.kernel};
  const int A = int(out.basis.size());
  if (A == 0) throw Error("empty basis: the problem has no atoms");
  AtomIndex idx;
  for (int j = 0; j < A; ++j) {
    if (!idx.index.emplace(atom_key(out.basis[j]), j).second) throw Error("duplicate atom in basis");
  }
  out.factor = gram(out.basis, p.kernel);
  // <f, basis_j> = (G a)_j with a = L^{-T} w, so the row is (L^{-1} G)^T.
  out.eval = out.factor.lower.triangularView<Eigen::Lower>().solve(out.factor.gram).transpose();

  ConeProgram& prog = out.program;
  out.w_offset = prog.add_variables(A, "w");
  const int B = p.free_bias_dim();
  if (B > 0) out.bias_offset = prog.add_variables(B, "b");

  auto form_row = [&](const AffineForm& f, SparseRow& row, double& constant, double scale = 1.0) {
    Vec dense = Vec::Zero(A);
    for (const auto& [c, a] : f.evals) dense += c * out.eval.row(idx.find(a)).transpose();
    for (int j = 0; j < A; ++j)
      if (dense[j] != 0.0) row.push_back({out.w_offset + j, scale * dense[j]});
    if (B > 0 && f.bias.size() == B)
      for (int k = 0; k < B; ++k)
        if (f.bias[k] != 0.0) row.push_back({out.bias_offset + k, scale * f.bias[k]});
    constant += scale * f.constant;
  };

  // coefficient of the shift in whitened coordinates
  auto shift_w = [&](const Model* m) -> Vec {
    Vec a0 = Vec::Zero(A);
    if (m)
      for (size_t j = 0; j < m->basis().size(); ++j) a0[idx.find(m->basis()[j])] += m->coeffs()[j];
    return out.factor.lower.transpose() * a0;
  };

  auto norm_var = [&](const Model* m) -> int {
    auto it = out.norm_var.find(m);
    if (it != out.norm_var.end()) return it->second;
    const int t = prog.add_variables(1, m ? "t_shift" : "t");
    const Vec w0 = shift_w(m);
    std::vector<SparseRow> rows(A + 1);
    std::vector<double> cst(A + 1, 0.0);
    rows[0] = {{t, 1.0}};
    for (int j = 0; j < A; ++j) {
      rows[j + 1] = {{out.w_offset + j, 1.0}};
      cst[j + 1] = -w0[j];
    }
    prog.add_block(ConeKind::soc, rows, cst, m ? "norm_shift" : "norm");
    out.norm_var.emplace(m, t);
    return t;
  };

  // objective
  switch (p.regularizer.kind) {
    case RegularizerKind::none:
      break;
    case RegularizerKind::norm: {
      const int t = norm_var(nullptr);
      prog.q[t] += p.regularizer.weight;
      break;
    }
    case RegularizerKind::norm_squared:
      for (int j = 0; j < A; ++j) prog.P(out.w_offset + j, out.w_offset + j) += 2.0 * p.regularizer.weight;
      break;
    case RegularizerKind::norm_bound: {
      const int t = norm_var(nullptr);
      prog.add_block(ConeKind::nonneg, std::vector<SparseRow>{{{t, -1.0}}}, {p.regularizer.bound}, "norm_bound");
      break;
    }
  }
  if (p.loss == LossKind::squared) {
    const int n = prog.num_vars();
    Mat Pl = Mat::Zero(n, n);
    Vec ql = Vec::Zero(n);
    for (const auto& o : p.observations) {
      Vec phi = Vec::Zero(n);
      phi.segment(out.w_offset, A) = out.eval.row(idx.find(o.atom)).transpose();
      if (B > 0 && o.bias.size() == B) phi.segment(out.bias_offset, B) = o.bias;
      Pl.selfadjointView<Eigen::Lower>().rankUpdate(phi, 2.0 * o.weight);
      ql -= 2.0 * o.weight * o.target * phi;
      prog.objective_constant += o.weight * o.target * o.target;
    }
    prog.P += Pl.selfadjointView<Eigen::Lower>();
    prog.q += ql;
  }

  // interpolation conditions
  if (!p.equalities.empty()) {
    std::vector<SparseRow> rows;
    std::vector<double> cst;
    for (const auto& e : p.equalities) {
      AffineForm f;
      f.evals.push_back({1.0, e.atom});
      f.constant = -e.value;
      f.bias = e.bias;
      rows.emplace_back();
      cst.push_back(0.0);
      form_row(f, rows.back(), cst.back());
    }
    prog.add_block(ConeKind::zero, rows, cst, "interpolation");
  }
  if (B > 0 && p.bias_set == BiasSet::box) {
    std::vector<SparseRow> rows;
    std::vector<double> cst;
    for (int k = 0; k < B; ++k) {
      rows.push_back({{out.bias_offset + k, 1.0}});
      cst.push_back(-p.bias_lo[k]);
      rows.push_back({{out.bias_offset + k, -1.0}});
      cst.push_back(p.bias_hi[k]);
    }
    prog.add_block(ConeKind::nonneg, rows, cst, "bias_box");
  }

  out.record_rows.resize(out.records.size());
  out.xi_var.assign(out.records.size(), -1);
  for (size_t r = 0; r < out.records.size(); ++r) {
    const auto& rec = out.records[r];
    const std::string tag = "c" + std::to_string(rec.provenance.constraint) + "_" + std::to_string(rec.provenance.element);
    auto& blocks = out.record_rows[r].blocks;
    std::visit(
        [&](const auto& body) {
          using T = std::decay_t<decltype(body)>;
          if constexpr (std::is_same_v<T, LinearRecord>) {
            std::vector<SparseRow> rows(1);
            std::vector<double> cst(1, 0.0);
            form_row(body.expr, rows[0], cst[0]);
            blocks.push_back(prog.add_block(body.equality ? ConeKind::zero : ConeKind::nonneg, rows, cst, tag));
          } else if constexpr (std::is_same_v<T, SocBufferRecord>) {
            std::vector<SparseRow> rows(1);
            std::vector<double> cst(1, 0.0);
            form_row(body.expr, rows[0], cst[0]);
            if (body.eta > 0) rows[0].push_back({norm_var(rec.shift.get()), -body.eta});
            blocks.push_back(prog.add_block(ConeKind::nonneg, rows, cst, tag));
          } else if constexpr (std::is_same_v<T, Rsoc2x2Record>) {
            std::vector<SparseRow> rows(3);
            std::vector<double> cst(3, 0.0);
            form_row(body.m11, rows[0], cst[0]);
            form_row(body.m22, rows[1], cst[1]);
            form_row(body.m12, rows[2], cst[2], std::sqrt(2.0));
            if (body.eta > 0) {
              const int t = norm_var(rec.shift.get());
              rows[0].push_back({t, -body.eta});
              rows[1].push_back({t, -body.eta});
            }
            blocks.push_back(prog.add_block(ConeKind::rsoc, rows, cst, tag));
          } else {
            // [lhs + xi (<v,c> - rho); r (w - w0 + xi w_v)] in SOC, xi >= 0
            std::vector<SparseRow> rows(A + 1);
            std::vector<double> cst(A + 1, 0.0);
            form_row(body.lhs, rows[0], cst[0]);
            const Vec w0 = shift_w(rec.shift.get());
            const double r0 = body.radius;
            Vec wv = Vec::Zero(A);
            int xi = -1;
            if (body.has_halfspace) {
              xi = prog.add_variables(1, "xi");
              out.xi_var[r] = xi;
              Vec av = Vec::Zero(A);
              for (const auto& [c, a] : body.halfspace.normal.terms) av[idx.find(a)] += c;
              wv = out.factor.lower.transpose() * av;
              const double vc = rkhs_inner(body.halfspace.normal, body.center, p.kernel);
              rows[0].push_back({xi, vc - body.halfspace.offset});
              blocks.push_back(prog.add_block(ConeKind::nonneg, std::vector<SparseRow>{{{xi, 1.0}}}, {0.0}, tag + "_xi"));
            }
            for (int j = 0; j < A; ++j) {
              rows[j + 1] = {{out.w_offset + j, r0}};
              if (xi >= 0 && wv[j] != 0.0) rows[j + 1].push_back({xi, r0 * wv[j]});
              cst[j + 1] = -r0 * w0[j];
            }
            blocks.push_back(prog.add_block(ConeKind::soc, rows, cst, tag));
          }
        },
        rec.body);
  }
  return out;
}

namespace {

// distance-to-boundary of the record's main block, in the block's own units
double block_residual(const ConeBlock& b, const Vec& s) {
  const double* v = s.data() + b.row_offset;
  switch (b.kind) {
    case ConeKind::zero:
      return 0.0;
    case ConeKind::nonneg:
      return v[0];
    case ConeKind::soc: {
      double t = 0.0;
      for (int i = 1; i < b.dim; ++i) t += v[i] * v[i];
      return v[0] - std::sqrt(t);
    }
    case ConeKind::rsoc: {
      double t = 0.5 * (v[0] - v[1]) * (v[0] - v[1]);
      for (int i = 2; i < b.dim; ++i) t += v[i] * v[i];
      return (v[0] + v[1]) / std::sqrt(2.0) - std::sqrt(t);
    }
  }
  return 0.0;
}

}  // namespace

RecoveredModel recover_model(const AssembledProblem& problem, const Solution& sol, double active_tol) {
  if (sol.status == SolveStatus::infeasible) throw Error("conic program is infeasible");
  if (sol.status == SolveStatus::unbounded) throw Error("conic program is unbounded");
  if (sol.status == SolveStatus::max_iter && !(sol.primal_residual <= 1e-6 && sol.dual_residual <= 1e-6))
    throw Error("solver stopped at the iteration limit without a usable iterate");
  const int A = int(problem.basis.size());
  Vec w = sol.x.segment(problem.w_offset, A);
  Vec a = problem.factor.lower.transpose().triangularView<Eigen::Upper>().solve(w);
  Vec b = Vec::Zero(problem.bias_dim);
  if (problem.bias_offset >= 0) b = sol.x.segment(problem.bias_offset, problem.bias_dim);
  const double nrm2 = a.dot(problem.factor.gram * a);
  Model model(problem.kernel, problem.basis, a, b, std::sqrt(std::max(0.0, nrm2)));
  std::vector<Provenance> active;
  for (size_t r = 0; r < problem.records.size(); ++r) {
    const auto& blocks = problem.record_rows[r].blocks;
    if (blocks.empty()) continue;
    const ConeBlock& main = problem.program.blocks()[blocks.back()];
    const double res = block_residual(main, sol.slack);
    const double scale = 1.0 + std::abs(sol.slack[main.row_offset]);
    if (res <= active_tol * scale) {
      const Provenance& pv = problem.records[r].provenance;
      if (active.empty() || active.back().constraint != pv.constraint || active.back().element != pv.element)
        active.push_back(pv);
    }
  }
  return RecoveredModel{std::move(model), std::move(active), sol.objective, sol.status, std::move(w)};
}

FitResult fit(const ProblemSpec& p, const std::vector<ConicConstraintRecord>& records, const SolverSettings& settings,
              const Vec* warm_start) {
  const auto t0 = std::chrono::steady_clock::now();
  AssembledProblem prob = assemble(p, collect_atoms(p, records), records);
  Solution sol = solve(prob.program, settings, warm_start);
  RecoveredModel rec = recover_model(prob, sol);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return FitResult{std::move(rec), std::move(prob), std::move(sol), secs};
}

BoundReport compute_bounds(const BoundInputs& in) {
  BoundReport r;
  r.v_app = in.v_app;
  r.v_relax = in.v_relax;
  r.eta_inf = in.eta_inf;
  r.fill_distance = in.fill_distance;
  if (in.v_relax) {
    const double gap = std::max(0.0, in.v_app - *in.v_relax);
    r.gap = gap;
    if (in.mu_f && *in.mu_f > 0) r.radius_f = std::sqrt(2.0 * gap / *in.mu_f);
    if (in.mu_b && *in.mu_b > 0) r.radius_b = std::sqrt(2.0 * gap / *in.mu_b);
  } else {
    r.note = "no relaxed value; gap bound unavailable";
  }
  if (in.lipschitz_b) {
    if (in.eta_inf == 0.0) {
      r.apriori = 0.0;
    } else if (in.bias_direction.size() == 0 || in.bias_maps.empty()) {
      if (!r.note.empty()) r.note += "; ";
      r.note += "a-priori bound needs a bias direction";
    } else {
      double denom = std::numeric_limits<double>::infinity();
      for (const Mat& G : in.bias_maps) {
        const Vec gb = G * in.bias_direction;
        denom = std::min(denom, gb.minCoeff());
      }
      if (denom > 0) {
        const double cf = in.shift_distance / denom;
        r.apriori = *in.lipschitz_b * cf * in.bias_direction.norm() * in.eta_inf;
      } else {
        if (!r.note.empty()) r.note += "; ";
        r.note += "bias direction does not strictly increase every constraint";
      }
    }
  }
  return r;
}

}  // namespace shapekernel
