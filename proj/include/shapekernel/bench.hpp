#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "shapekernel/io.hpp"
#include "shapekernel/soap.hpp"

namespace shapekernel::bench {

// ---- configuration and results

struct ExperimentConfig {
  std::string experiment;  // catenary, control, robotarm, econ, custom
  Json params = Json::object();
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string scheme;  // empty means every scheme the experiment supports
  std::optional<double> eta_safety;
  std::optional<int> grid_res;
  SolverSettings solver;

  // params[key] if present, else fallback
  template <class T>
  T get(const std::string& key, T fallback) const {
    return params.contains(key) ? params[key].get<T>() : fallback;
  }
};

ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& c);

struct ExperimentResult {
  Json summary = Json::object();
  std::map<std::string, CsvTable> tables;  // file name -> table, deterministic content only
  std::map<std::string, CsvTable> timing_tables;
  std::vector<std::pair<std::string, Model>> models;  // name -> model, written as model_<name>.json
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);
void emit_results(const ExperimentResult& r, const std::string& out_dir);

// Constraints and grid of the experiment for `verify`.
struct VerifyTarget {
  std::vector<ShapeConstraint> constraints;
  int grid_res = 10000;
};
VerifyTarget verify_target(const ExperimentConfig& cfg);

// ---- datasets

struct Preprocessing {
  bool log_output = false;
  bool negate_output = false;
  Vec mean, stddev;  // per column of [X Y] as loaded after the log transform
  std::vector<int> dropped_rows;
  bool synthetic = false;
  long raw_rows = 0;
};

struct Dataset {
  Mat X;
  Mat Y;
  Preprocessing prep;
};

std::vector<Vec> latin_hypercube(int n, int dim, std::mt19937_64& rng);

// ---- catenary

struct CatenaryConfig {
  double rate = 5.0;
  double floor = 0.5;
  double lo = 0.2, hi = 0.8;
};

ProblemSpec catenary_problem(const CatenaryConfig& c = {}, bool squared_norm = false);

// Minimum-norm function for the discretized constraint on a fine grid, solved in knot values.
// The Laplacian-kernel norm on the line is (1/2 rate) int f'^2 + rate^2 f^2, so between knots the
// minimizer is a hyperbolic spline and the program is tridiagonal.
struct CatenaryReference {
  double rate = 5.0;
  std::vector<double> knots;
  std::vector<double> values;
  double norm_sq = 0.0;
  int active = 0;
  int iterations = 0;

  double norm() const { return std::sqrt(norm_sq); }
  double eval(double x) const;
  // |model - reference|_K for a model built from value atoms of the same Laplacian kernel
  double distance(const Model& m) const;
};

CatenaryReference catenary_reference(int grid_points = 10000, const CatenaryConfig& c = {});

// ---- control

struct WallParams {
  int centers = 10;         // Gaussian expansion centers, equispaced on [0,1]
  double bandwidth = 0.15;  // of the expansion
  double amplitude = 0.4;   // std of the center weights of the mid line
  double half_width = 0.2;  // corridor half-width before modulation
  double modulation = 0.1;  // weight of |d(t)| added to the half-width
};

// Piecewise constant on [0,1] with `cells` equal cells; cell m is [2 m delta, 2 (m + 1) delta].
struct ControlWalls {
  std::vector<double> lower, upper;
  int cells() const { return int(lower.size()); }
  double delta() const { return 0.5 / cells(); }
  double center(int m) const { return (2 * m + 1) * delta(); }
  int cell_of(double t) const;
  double lower_at(double t) const { return lower[cell_of(t)]; }
  double upper_at(double t) const { return upper[cell_of(t)]; }
};

// mid(t) = c(t) - c(0), half-width h + mod |d(t)|, both sampled at cell centers, where c and d are
// Gaussian expansions with N(0, amplitude^2) weights.
ControlWalls control_walls(int cells, std::uint64_t seed, const WallParams& wp = {});

KernelSpec control_kernel();
// Floor and ceiling constraint of every cell, regions equal to the cells.
std::vector<ShapeConstraint> control_constraints(const ControlWalls& w);

// ---- robot arm

// Planar arm; inputs x = [L_1..L_NS, theta_1..theta_NS] in [0,1]^d, angles in turns.
struct RobotArm {
  int segments = 2;  // NS
  int dim() const { return 2 * segments; }
  Vec pose(const Vec& x) const;  // [tip x, tip y, sin of the total angle]
  // c_i^l(x) = d pose_l / d L_i: cos (l = 0) or sin (l = 1) of the cumulative angle of joint i
  double coefficient(const Vec& x, int i, int l) const;
};

Dataset synth_robot_data(const RobotArm& arm, int n, double noise, std::uint64_t seed);

// Sample covariance of the noiseless outputs at `samples` uniform inputs.
Mat robot_output_covariance(const RobotArm& arm, int samples, std::uint64_t seed);

// ---- econ

Dataset load_labour_csv(const std::string& path);
// Cobb-Douglas x1^0.4 x2^0.5 with log-normal inputs and multiplicative log-normal noise.
Dataset synthetic_labour(int rows, std::uint64_t seed, double input_log_sd = 0.8, double noise = 0.1);
// Log transform, z-scoring and outlier removal applied to raw (capital, labour, output) rows.
Dataset preprocess_labour(Mat raw, bool synthetic);

// -d g/dx_j >= 0 (j = 1, 2) and Hessian PSD on kcons, in standardized coordinates.
std::vector<ShapeConstraint> econ_constraints(const Box& kcons, bool mono, bool conv);

}  // namespace shapekernel::bench
