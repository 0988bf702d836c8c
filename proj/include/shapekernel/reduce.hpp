#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shapekernel/conic.hpp"
#include "shapekernel/tighten.hpp"

namespace shapekernel {

// weight * (target - <f, atom> - bias . b)^2
struct Observation {
  Atom atom;
  double target = 0.0;
  double weight = 1.0;
  Vec bias;
};

// <f, atom> + bias . b = value
struct Interpolation {
  Atom atom;
  double value = 0.0;
  Vec bias;
};

enum class LossKind { none, squared };
// norm: weight |f|; norm_squared: weight |f|^2; norm_bound: |f| <= bound
enum class RegularizerKind { none, norm, norm_squared, norm_bound };
enum class BiasSet { all, zero, box };

struct Regularizer {
  RegularizerKind kind = RegularizerKind::none;
  double weight = 1.0;
  double bound = 0.0;
};

struct ProblemSpec {
  explicit ProblemSpec(KernelSpec k) : kernel(std::move(k)) {}

  KernelSpec kernel;
  LossKind loss = LossKind::none;
  std::vector<Observation> observations;
  std::vector<Interpolation> equalities;
  Regularizer regularizer;
  int bias_dim = 0;
  BiasSet bias_set = BiasSet::zero;
  Vec bias_lo, bias_hi;
  std::vector<ShapeConstraint> constraints;

  void validate() const;
  int free_bias_dim() const { return bias_set == BiasSet::zero ? 0 : bias_dim; }
  // Strong convexity modulus in f of the objective, when it has one.
  std::optional<double> strong_convexity_f() const;
};

std::vector<Atom> collect_atoms(const ProblemSpec& p, const std::vector<ConicConstraintRecord>& records);

struct RecordRows {
  std::vector<int> blocks;  // indices into program.blocks()
};

// Variables are whitened coefficients w = L^T a (so |f|_K <= |w|), the bias, norm epigraphs and
// inclusion auxiliaries.
struct AssembledProblem {
  ConeProgram program;
  std::vector<Atom> basis;
  GramFactor factor;
  Mat eval;  // row j: <f, basis_j> as a linear form in w
  int w_offset = 0;
  int bias_offset = -1;
  int bias_dim = 0;
  std::map<const Model*, int> norm_var;
  std::vector<ConicConstraintRecord> records;
  std::vector<RecordRows> record_rows;
  std::vector<int> xi_var;  // per record, -1 if none
  KernelSpec kernel;
};

AssembledProblem assemble(const ProblemSpec& p, std::vector<Atom> basis, std::vector<ConicConstraintRecord> records);

struct RecoveredModel {
  Model model;
  std::vector<Provenance> active;
  double objective = 0.0;
  SolveStatus status = SolveStatus::optimal;
  Vec whitened;
};

RecoveredModel recover_model(const AssembledProblem& problem, const Solution& solution, double active_tol = 1e-7);

// collect_atoms + assemble + solve + recover_model.
struct FitResult {
  RecoveredModel fit;
  AssembledProblem problem;
  Solution solution;
  double seconds = 0.0;
};

FitResult fit(const ProblemSpec& p, const std::vector<ConicConstraintRecord>& records,
              const SolverSettings& settings = {}, const Vec* warm_start = nullptr);

struct BoundInputs {
  double v_app = 0.0;
  std::optional<double> v_relax;
  std::optional<double> mu_f;
  std::optional<double> mu_b;
  std::optional<double> lipschitz_b;
  Vec bias_direction;
  std::vector<Mat> bias_maps;  // Gamma_i
  double shift_distance = 0.0;  // max_i |f_app - f0_i|, surrogate for the unknown optimum
  double eta_inf = 0.0;
  double fill_distance = 0.0;
};

struct BoundReport {
  double v_app = 0.0;
  std::optional<double> v_relax;
  std::optional<double> gap;
  std::optional<double> radius_f;
  std::optional<double> radius_b;
  std::optional<double> apriori;  // uses the tightened norm as surrogate
  double eta_inf = 0.0;
  double fill_distance = 0.0;
  std::string note;
};

BoundReport compute_bounds(const BoundInputs& in);

}  // namespace shapekernel
