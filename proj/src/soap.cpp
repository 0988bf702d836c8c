#include "shapekernel/soap.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <unordered_map>

#include "shapekernel/error.hpp"
#include "shapekernel/io.hpp"

namespace shapekernel {

std::string soap_mode_name(SoapMode m) { return m == SoapMode::ball ? "ball" : "omega"; }

double model_distance(const Model& f, const Model* f0) {
  if (!f0) return f.norm();
  double cross = 0.0;
  for (size_t j = 0; j < f0->basis().size(); ++j) {
    const Atom& a = f0->basis()[j];
    cross += f0->coeffs()[j] * apply(a.functional, f, a.point);
  }
  return std::sqrt(std::max(0.0, f.norm() * f.norm() - 2.0 * cross + f0->norm() * f0->norm()));
}

namespace {

double eval_form(const AffineForm& form, const Model& m) {
  double v = form.constant;
  for (const auto& [c, a] : form.evals) v += c * apply(a.functional, m, a.point);
  if (form.bias.size() > 0 && form.bias.size() == m.bias().size()) v += form.bias.dot(m.bias());
  return v;
}

// <f - f0, g>
double shifted_inner(const Model& f, const Model* f0, const RkhsElement& g) {
  double s = 0.0;
  for (const auto& [c, a] : g.terms) {
    s += c * apply(a.functional, f, a.point);
    if (f0) s -= c * apply(a.functional, *f0, a.point);
  }
  return s;
}

// max over xi >= 0 of A + xi B - r sqrt(n + 2 c xi + a xi^2)
double inclusion_slack(double A, double B, double r, double n, double c, double a) {
  auto phi = [&](double xi) { return A + xi * B - r * std::sqrt(std::max(0.0, n + 2 * c * xi + a * xi * xi)); };
  if (a <= 0) return B > 0 ? std::numeric_limits<double>::infinity() : phi(0.0);
  const double br = B / r;
  if (br >= std::sqrt(a)) return std::numeric_limits<double>::infinity();
  const double D = std::max(0.0, n - c * c / a);
  const double u = br * std::sqrt(D) / std::sqrt(a * (a - br * br));
  return phi(std::max(0.0, u - c / a));
}

}  // namespace

double record_slack(const Model& model, const std::vector<const ConicConstraintRecord*>& group) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto* r : group)
    if (const auto* rs = std::get_if<Rsoc2x2Record>(&r->body)) {
      const double t = rs->eta * model_distance(model, r->shift.get());
      const double m11 = eval_form(rs->m11, model) - t, m22 = eval_form(rs->m22, model) - t;
      const double m12 = eval_form(rs->m12, model);
      const double tr = 0.5 * (m11 + m22), df = 0.5 * (m11 - m22);
      return tr - std::sqrt(df * df + m12 * m12);
    }
  for (const auto* r : group) {
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, LinearRecord>) {
            const double v = eval_form(b.expr, model);
            best = std::min(best, b.equality ? -std::abs(v) : v);
          } else if constexpr (std::is_same_v<T, SocBufferRecord>) {
            best = std::min(best, eval_form(b.expr, model) - b.eta * model_distance(model, r->shift.get()));
          } else if constexpr (std::is_same_v<T, OmegaInclusionRecord>) {
            const Model* f0 = r->shift.get();
            const double A = eval_form(b.lhs, model);
            const double dist = model_distance(model, f0);
            if (!b.has_halfspace) {
              best = std::min(best, A - b.radius * dist);
              return;
            }
            const auto& v = b.halfspace.normal;
            const Model& K = model;
            const double vc = rkhs_inner(v, b.center, K.kernel());
            const double hv = shifted_inner(model, f0, v);
            const double vv = rkhs_inner(v, v, K.kernel());
            best = std::min(best,
                            inclusion_slack(A, vc - b.halfspace.offset, b.radius, dist * dist, hv, vv));
          }
        },
        r->body);
  }
  return best;
}

std::vector<Provenance> detect_saturated(const Model& model, const std::vector<ConicConstraintRecord>& records,
                                         double tol_sat) {
  std::map<std::pair<int, int>, std::vector<const ConicConstraintRecord*>> groups;
  for (const auto& r : records) groups[{r.provenance.constraint, r.provenance.element}].push_back(&r);
  std::vector<Provenance> out;
  for (const auto& [key, g] : groups) {
    if (record_slack(model, g) <= tol_sat) out.push_back(Provenance{key.first, key.second});
  }
  return out;
}

namespace {

struct ConstraintTools {
  EtaEstimator eta;
  DiffFunctional d0;
};

double element_size(const ProblemSpec& p, const SoapSettings& s, const ConstraintTools& t, const Vec& center,
                    double radius) {
  if (s.mode == SoapMode::ball) return t.eta(center, radius);
  return omega_diameter(p.kernel, t.d0, center, radius, s.omega_style, s.eta);
}

// largest delta in [0, hi] with size(delta) <= target
double bisect_size(auto&& size, double target, double hi) {
  if (size(hi) <= target) return hi;
  double lo = 0.0;
  const double tol = 1e-6 * hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (size(mid) <= target)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

std::vector<ConicConstraintRecord> soap_records(const ProblemSpec& p, const SoapSettings& s,
                                                const std::vector<std::vector<SoapElement>>& coverings) {
  std::vector<ConicConstraintRecord> out;
  for (size_t i = 0; i < p.constraints.size(); ++i) {
    const ShapeConstraint& c = p.constraints[i];
    std::vector<InputBall> balls;
    std::vector<double> etas;
    for (const auto& e : coverings[i]) {
      balls.push_back(e.ball);
      etas.push_back(e.eta);
    }
    std::vector<ConicConstraintRecord> recs;
    if (s.mode == SoapMode::ball) {
      recs = tighten_soc(c, balls, etas, int(i));
    } else {
      if (c.size() != 1) throw Error("omega soap mode needs scalar constraints");
      recs = tighten_omega(c, omega_cover(p.kernel, c.op.entry(0, 0), balls, s.omega_style, s.eta), int(i));
    }
    out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return out;
}

namespace {

Vec warm_point(const AssembledProblem& prob, const Model& prev) {
  const int A = int(prob.basis.size());
  std::unordered_map<std::string, int> idx;
  for (int j = 0; j < A; ++j) idx.emplace(atom_key(prob.basis[j]), j);
  Vec a = Vec::Zero(A);
  for (size_t j = 0; j < prev.basis().size(); ++j) {
    auto it = idx.find(atom_key(prev.basis()[j]));
    if (it != idx.end()) a[it->second] += prev.coeffs()[j];
  }
  Vec x = Vec::Zero(prob.program.num_vars());
  const Vec w = prob.factor.lower.transpose() * a;
  x.segment(prob.w_offset, A) = w;
  if (prob.bias_offset >= 0 && prev.bias().size() == prob.bias_dim)
    x.segment(prob.bias_offset, prob.bias_dim) = prev.bias();
  for (const auto& [m, t] : prob.norm_var) {
    Vec d = w;
    if (m) {
      Vec a0 = Vec::Zero(A);
      for (size_t j = 0; j < m->basis().size(); ++j) a0[idx.at(atom_key(m->basis()[j]))] += m->coeffs()[j];
      d -= prob.factor.lower.transpose() * a0;
    }
    x[t] = d.norm();
  }
  return x;
}

}  // namespace

SoapResult run_soap(const ProblemSpec& p, const SoapSettings& s) {
  if (!(s.gamma > 0 && s.gamma < 1)) throw Error("soap contraction factor must lie in (0, 1)");
  if (!(s.delta0 > 0)) throw Error("soap initial radius must be positive");
  if (s.k_max < 0) throw Error("soap iteration count must be non-negative");
  if (p.constraints.empty()) throw Error("soap refinement needs at least one shape constraint");

  std::vector<ConstraintTools> tools;
  for (const auto& c : p.constraints) tools.push_back({EtaEstimator(p.kernel, c.op, s.eta), c.op.entry(0, 0)});

  long next_id = 0;
  SoapState st;
  st.coverings.resize(p.constraints.size());
  for (size_t i = 0; i < p.constraints.size(); ++i) {
    for (const auto& b : cover_box(p.constraints[i].region, s.delta0, s.eta.norm)) {
      SoapElement e;
      e.ball = b;
      e.eta = tools[i].eta(b.center, b.radius);
      e.size = s.mode == SoapMode::ball ? e.eta : element_size(p, s, tools[i], b.center, b.radius);
      e.id = next_id++;
      st.coverings[i].push_back(e);
    }
  }
  st.initial_coverings = st.coverings;

  const auto t_start = std::chrono::steady_clock::now();
  std::optional<FitResult> last;
  for (int k = 0; k <= s.k_max; ++k) {
    st.k = k;
    auto records = soap_records(p, s, st.coverings);
    AssembledProblem prob = assemble(p, collect_atoms(p, records), records);
    Vec warm;
    if (s.warm_start && last) warm = warm_point(prob, last->fit.model);
    Solution sol = solve(prob.program, s.solver, warm.size() ? &warm : nullptr);
    if (sol.status == SolveStatus::infeasible) {
      if (k == 0)
        throw Error("soap: initial tightened program infeasible; reduce the initial radius or review the constraints");
      throw Error("soap: tightened program became infeasible at iteration " + std::to_string(k));
    }
    RecoveredModel rec = recover_model(prob, sol);

    SoapHistoryRow row;
    row.k = k;
    for (const auto& cov : st.coverings) {
      row.elements += int(cov.size());
      for (const auto& e : cov) row.max_eta = std::max(row.max_eta, e.eta);
    }
    row.value = sol.objective;
    row.solver_iterations = sol.iterations;
    if (!st.history.empty() && row.value > st.history.back().value) ++st.nonmonotone_events;

    const double tol = s.tol_sat * (1.0 + rec.model.norm());
    std::vector<Provenance> sat;
    if (k < s.k_max) sat = detect_saturated(rec.model, prob.records, tol);
    row.bursts = int(sat.size());
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    st.history.push_back(row);
    last = FitResult{std::move(rec), std::move(prob), std::move(sol), row.wall_time};
    if (sat.empty()) break;

    // burst: replace each saturated element by a finer cover of its clipped ball
    std::vector<std::vector<bool>> burst(p.constraints.size());
    for (size_t i = 0; i < burst.size(); ++i) burst[i].assign(st.coverings[i].size(), false);
    for (const auto& pv : sat) burst[pv.constraint][pv.element] = true;
    for (size_t i = 0; i < p.constraints.size(); ++i) {
      const ShapeConstraint& c = p.constraints[i];
      std::vector<SoapElement> next;
      for (size_t m = 0; m < st.coverings[i].size(); ++m) {
        const SoapElement& e = st.coverings[i][m];
        if (!burst[i][m]) {
          next.push_back(e);
          continue;
        }
        const double target = s.gamma * e.size;
        const double found = bisect_size(
            [&](double d) { return element_size(p, s, tools[i], e.ball.center, d); }, target, e.ball.radius);
        const double delta_new = std::min(found, s.gamma * e.ball.radius);
        if (!(delta_new > 0)) throw Error("soap: refinement radius collapsed to zero");
        for (const auto& b : cover_box(c.region.clipped(e.ball.center, e.ball.radius), delta_new, e.ball.norm)) {
          SoapElement ch;
          ch.ball = b;
          ch.eta = tools[i].eta(b.center, b.radius);
          ch.size = s.mode == SoapMode::ball ? ch.eta : element_size(p, s, tools[i], b.center, b.radius);
          ch.id = next_id++;
          ch.parent = e.id;
          ch.generation = e.generation + 1;
          next.push_back(ch);
        }
      }
      st.coverings[i] = std::move(next);
    }
  }
  Model model = last->fit.model;
  return SoapResult{std::move(model), std::move(st), std::move(*last)};
}

void write_history_csv(const std::string& path, const SoapState& st, bool with_time) {
  std::vector<std::string> header = {"k", "M", "v", "bursts", "maxEta"};
  if (with_time) header.push_back("wallTime");
  CsvTable t(header);
  for (const auto& r : st.history) {
    std::vector<double> row = {double(r.k), double(r.elements), r.value, double(r.bursts), r.max_eta};
    if (with_time) row.push_back(r.wall_time);
    t.add_numbers(row);
  }
  t.write(path);
}

}  // namespace shapekernel
