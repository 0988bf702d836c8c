#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

namespace shapekernel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Per-coordinate derivative orders.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(int dim) : orders_(dim, 0) {}
  MultiIndex(std::initializer_list<int> orders) : orders_(orders) {}
  explicit MultiIndex(std::vector<int> orders) : orders_(std::move(orders)) {}

  static MultiIndex unit(int dim, int axis, int order = 1);

  int dim() const { return static_cast<int>(orders_.size()); }
  int order() const;
  int operator[](int i) const { return orders_[i]; }
  int& operator[](int i) { return orders_[i]; }
  const std::vector<int>& orders() const { return orders_; }

  MultiIndex operator+(const MultiIndex& other) const;
  auto operator<=>(const MultiIndex&) const = default;

 private:
  std::vector<int> orders_;
};

struct GaussianKernel {
  Vec sigma;
};

struct LaplacianKernel {
  double rate = 1.0;
  int dim = 1;
};

struct DecomposableGaussianKernel {
  Vec sigma;
  Mat output_cov;
};

struct LtiControlKernel {
  Mat A;
  Mat B;
};

class KernelSpec {
 public:
  using Variant = std::variant<GaussianKernel, LaplacianKernel, DecomposableGaussianKernel,
                               LtiControlKernel>;

  static KernelSpec gaussian(Vec sigma, int smoothness = 2);
  static KernelSpec gaussian(int dim, double sigma, int smoothness = 2);
  static KernelSpec laplacian(double rate, int dim = 1);
  static KernelSpec decomposable_gaussian(Vec sigma, Mat output_cov, int smoothness = 2);
  static KernelSpec lti_control(Mat A, Mat B);

  const Variant& variant() const { return variant_; }
  std::string kind_name() const;
  int input_dim() const;
  int output_dim() const;
  int smoothness() const { return smoothness_; }
  bool translation_invariant() const;

  Mat eval(const Vec& x, const Vec& x2) const;

  // d^{r1}/dx^{r1} d^{r2}/dx2^{r2} of [K(x, x2)]_{q1,q2}.
  double eval_partial(const MultiIndex& r1, const MultiIndex& r2, int q1, int q2, const Vec& x,
                      const Vec& x2) const;

  std::string fingerprint() const;

 private:
  KernelSpec(Variant v, int smoothness);
  void check_point(const Vec& x, const char* which) const;

  Variant variant_;
  int smoothness_ = 0;
};

// Controllability-type kernel: integral over [0, min(s,t)] of
// e^{(s-tau)A} B B^T e^{(t-tau)A^T}.
Mat lti_eval(const Mat& A, const Mat& B, double s, double t);

}  // namespace shapekernel
