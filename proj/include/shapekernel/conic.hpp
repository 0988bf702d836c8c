#pragma once

#include <string>
#include <utility>
#include <vector>

#include "shapekernel/kernel.hpp"

namespace shapekernel {

enum class ConeKind { zero, nonneg, soc, rsoc };

std::string cone_kind_name(ConeKind k);

using SparseRow = std::vector<std::pair<int, double>>;

struct ConeBlock {
  ConeKind kind = ConeKind::nonneg;
  int row_offset = 0;
  int dim = 0;
  std::string tag;
};

struct VariableBlock {
  std::string name;
  int offset = 0;
  int size = 0;
};

// min 0.5 x'Px + q'x + c  s.t.  C_k x + c_k in K_k for every block k.
// Rotated cones are {(u, v, w): 2uv >= |w|^2, u, v >= 0}.
class ConeProgram {
 public:
  int add_variables(int count, std::string name);
  int num_vars() const { return num_vars_; }
  const std::vector<VariableBlock>& variable_blocks() const { return var_blocks_; }

  int add_block(ConeKind kind, const std::vector<SparseRow>& rows, const std::vector<double>& constants,
                std::string tag);
  int add_block(ConeKind kind, const Mat& coeffs, const Vec& constants, std::string tag);

  const std::vector<ConeBlock>& blocks() const { return blocks_; }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const SparseRow& row(int i) const { return rows_[i]; }
  double row_constant(int i) const { return constants_[i]; }

  // Row-affine value C x + c.
  Vec row_values(const Vec& x) const;
  Mat dense_coeffs() const;

  Mat P;
  Vec q;
  double objective_constant = 0.0;

  double objective(const Vec& x) const;

 private:
  int num_vars_ = 0;
  std::vector<VariableBlock> var_blocks_;
  std::vector<ConeBlock> blocks_;
  std::vector<SparseRow> rows_;
  std::vector<double> constants_;
};

struct SolverSettings {
  int max_iter = 200;
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  double step_fraction = 0.99;
  // extra iterations after the tolerances are met, each kept only if it stays within tolerance
  int polish_iter = 4;
  bool trace = false;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };

std::string status_name(SolveStatus s);

struct IterateTrace {
  int iter;
  double pcost, dcost, gap, pres, dres, step;
};

struct Solution {
  SolveStatus status = SolveStatus::max_iter;
  Vec x;
  Vec slack;  // per program row, C x + c
  Vec dual;   // per program row
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  std::vector<IterateTrace> trace;
};

Solution solve(const ConeProgram& program, const SolverSettings& settings = {}, const Vec* warm_start = nullptr);

struct KktReport {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double complementarity = 0.0;
  double cone_violation = 0.0;
};

// Scaled residuals with the same normalization the solver uses for termination.
KktReport kkt_residuals(const ConeProgram& program, const Solution& solution);

}  // namespace shapekernel
