#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "shapekernel/covering.hpp"

namespace shapekernel {

enum class ConstraintMode { discretized, soc_ball, omega };

std::string mode_name(ConstraintMode m);

// 0 <= D(f - f0)(x) + diag(bias_map * b - offset) for all x in region.
struct ShapeConstraint {
  std::string name;
  Box region;
  SdpOperator op;
  Mat bias_map;  // P x B
  Vec offset;    // P
  std::shared_ptr<const Model> shift;  // null means f0 = 0
  ConstraintMode mode = ConstraintMode::soc_ball;

  int size() const { return op.size(); }
  void validate(int bias_dim) const;
};

// constant + sum_k coef_k <f, atom_k> + bias . b
struct AffineForm {
  double constant = 0.0;
  std::vector<std::pair<double, Atom>> evals;
  Vec bias;
};

struct Provenance {
  int constraint = 0;
  int element = 0;
};

struct LinearRecord {
  AffineForm expr;  // expr >= 0, or expr == 0 when equality
  bool equality = false;
};

struct SocBufferRecord {
  AffineForm expr;  // eta * |f - f0|_K <= expr
  double eta = 0.0;
};

struct Rsoc2x2Record {
  AffineForm m11, m12, m22;  // (m11 - eta t)(m22 - eta t) >= m12^2
  double eta = 0.0;
};

// lhs + xi (<v, c> - rho) >= r |f - f0 + xi v|_K with xi >= 0,
// where lhs = <f - f0, c> + Gamma b - b0. Without halfspace xi is absent.
struct OmegaInclusionRecord {
  AffineForm lhs;
  RkhsElement center;
  double radius = 0.0;
  bool has_halfspace = false;
  OmegaHalfspace halfspace;
  int xi_count() const { return has_halfspace ? 1 : 0; }
};

struct ConicConstraintRecord {
  std::variant<LinearRecord, SocBufferRecord, Rsoc2x2Record, OmegaInclusionRecord> body;
  Provenance provenance;
  std::shared_ptr<const Model> shift;
};

std::vector<ConicConstraintRecord> discretize(const ShapeConstraint& c, const std::vector<Vec>& points,
                                              int constraint_index = 0);
std::vector<ConicConstraintRecord> tighten_soc(const ShapeConstraint& c, const std::vector<InputBall>& cover,
                                               const std::vector<double>& etas, int constraint_index = 0);
std::vector<ConicConstraintRecord> tighten_omega(const ShapeConstraint& c, const std::vector<OmegaSet>& omegas,
                                                 int constraint_index = 0);

// D(f - f0)(x) + diag(bias_map * b - offset), using the model's own bias vector.
Mat slack_matrix(const Model& model, const ShapeConstraint& c, const Vec& x);
double min_slack(const Model& model, const ShapeConstraint& c, const Vec& x);

struct VerifyReport {
  double max_violation = 0.0;
  Vec worst_point;
  double min_eig = 0.0;  // smallest slack (P = 1) or smallest eigenvalue (P >= 2)
  long points = 0;
};

VerifyReport verify_pointwise(const Model& model, const ShapeConstraint& c, int grid_res);

// Grid points with grid_res per axis including the endpoints.
std::vector<Vec> box_grid(const Box& box, int grid_res);

}  // namespace shapekernel
