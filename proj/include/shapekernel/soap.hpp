#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shapekernel/reduce.hpp"

namespace shapekernel {

enum class SoapMode { ball, omega };

std::string soap_mode_name(SoapMode m);

struct SoapSettings {
  SoapMode mode = SoapMode::ball;
  double gamma = 0.8;
  int k_max = 30;
  double delta0 = 0.01;
  double tol_sat = 1e-8;  // scaled by (1 + |f|_K)
  OmegaStyle omega_style = OmegaStyle::ball_halfspace;
  EtaConfig eta;
  SolverSettings solver;
  bool warm_start = true;
};

struct SoapElement {
  InputBall ball;
  double eta = 0.0;       // SOC buffer of the ball
  double size = 0.0;      // eta (ball mode) or omega diameter (omega mode); refinement target is gamma * size
  long id = 0;
  long parent = -1;
  int generation = 0;
};

struct SoapHistoryRow {
  int k = 0;
  int elements = 0;
  double value = 0.0;
  int bursts = 0;
  double max_eta = 0.0;
  double wall_time = 0.0;
  int solver_iterations = 0;
};

struct SoapState {
  int k = 0;
  std::vector<std::vector<SoapElement>> coverings;  // per constraint
  std::vector<SoapHistoryRow> history;
  int nonmonotone_events = 0;  // count of v^(k+1) > v^(k)
  std::vector<std::vector<SoapElement>> initial_coverings;
};

struct SoapResult {
  Model model;
  SoapState state;
  FitResult last;
};

// Elements whose constraint holds with equality within tol_sat (absolute).
std::vector<Provenance> detect_saturated(const Model& model, const std::vector<ConicConstraintRecord>& records,
                                         double tol_sat);

// Smallest slack of a record group sharing one provenance tag, evaluated at the model.
double record_slack(const Model& model, const std::vector<const ConicConstraintRecord*>& group);

// |f - f0|_K with f0 possibly null.
double model_distance(const Model& f, const Model* f0);

std::vector<ConicConstraintRecord> soap_records(const ProblemSpec& p, const SoapSettings& s,
                                                const std::vector<std::vector<SoapElement>>& coverings);

SoapResult run_soap(const ProblemSpec& p, const SoapSettings& s);

void write_history_csv(const std::string& path, const SoapState& st, bool with_time = true);

}  // namespace shapekernel
