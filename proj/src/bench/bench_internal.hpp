#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "shapekernel/bench.hpp"

namespace shapekernel::bench {

ExperimentResult run_catenary(const ExperimentConfig& cfg);
ExperimentResult run_control(const ExperimentConfig& cfg);
ExperimentResult run_robotarm(const ExperimentConfig& cfg);
ExperimentResult run_econ(const ExperimentConfig& cfg);

VerifyTarget catenary_verify_target(const ExperimentConfig& cfg);
VerifyTarget control_verify_target(const ExperimentConfig& cfg);

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0);

// cfg.scheme if set (must be in `supported`), otherwise `defaults`
std::vector<std::string> selected_schemes(const ExperimentConfig& cfg, const std::vector<std::string>& supported,
                                          const std::vector<std::string>& defaults);

EtaConfig eta_config(const ExperimentConfig& cfg, NormKind norm);

// Records of one constraint over `cover` for scheme ball, hyp or disc (disc uses the centers).
std::vector<ConicConstraintRecord> scheme_records(const KernelSpec& kernel, const ShapeConstraint& c,
                                                  const std::vector<InputBall>& cover, const std::string& scheme,
                                                  const EtaConfig& eta, int index);

Json bound_to_json(const BoundReport& b);
Json fit_to_json(const FitResult& f);

std::vector<double> linspace(double a, double b, int n);

}  // namespace shapekernel::bench
