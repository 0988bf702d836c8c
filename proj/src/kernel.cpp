#include "shapekernel/kernel.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "shapekernel/error.hpp"

namespace shapekernel {

namespace {

constexpr int kMaxGaussianOrder = 2;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// n-th derivative of exp(-u^2 / (2 sigma^2)) with respect to u.
double gauss_derivative(int n, double u, double sigma) {
  const double a = 1.0 / (sigma * sigma);
  const double g = std::exp(-0.5 * a * u * u);
  const double u2 = u * u;
  switch (n) {
    case 0:
      return g;
    case 1:
      return -a * u * g;
    case 2:
      return (a * a * u2 - a) * g;
    case 3:
      return (-a * a * a * u2 * u + 3.0 * a * a * u) * g;
    case 4:
      return (a * a * a * a * u2 * u2 - 6.0 * a * a * a * u2 + 3.0 * a * a) * g;
    default:
      throw Error("gaussian derivative order " + std::to_string(n) + " not supported");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_vec(std::ostringstream& os, const Mat& m) {
  os << '[';
  for (Eigen::Index i = 0; i < m.size(); ++i) os << (i ? "," : "") << fmt(m.data()[i]);
  os << ']';
}

}  // namespace

MultiIndex MultiIndex::unit(int dim, int axis, int order) {
  MultiIndex r(dim);
  r[axis] = order;
  return r;
}

int MultiIndex::order() const { return std::accumulate(orders_.begin(), orders_.end(), 0); }

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  if (other.dim() != dim()) throw Error("multi-index dimension mismatch");
  MultiIndex out(*this);
  for (int i = 0; i < dim(); ++i) out.orders_[i] += other.orders_[i];
  return out;
}

KernelSpec::KernelSpec(Variant v, int smoothness) : variant_(std::move(v)), smoothness_(smoothness) {}

KernelSpec KernelSpec::gaussian(Vec sigma, int smoothness) {
  if (sigma.size() == 0 || (sigma.array() <= 0).any()) throw Error("gaussian lengthscales must be positive");
  if (smoothness < 0 || smoothness > kMaxGaussianOrder)
    throw Error("gaussian smoothness must be in [0, 2]");
  return KernelSpec(GaussianKernel{std::move(sigma)}, smoothness);
}

KernelSpec KernelSpec::gaussian(int dim, double sigma, int smoothness) {
  return gaussian(Vec::Constant(dim, sigma), smoothness);
}

KernelSpec KernelSpec::laplacian(double rate, int dim) {
  if (!(rate > 0)) throw Error("laplacian rate must be positive");
  if (dim < 1) throw Error("laplacian dimension must be positive");
  return KernelSpec(LaplacianKernel{rate, dim}, 0);
}

KernelSpec KernelSpec::decomposable_gaussian(Vec sigma, Mat output_cov, int smoothness) {
  if (sigma.size() == 0 || (sigma.array() <= 0).any()) throw Error("gaussian lengthscales must be positive");
  if (smoothness < 0 || smoothness > kMaxGaussianOrder)
    throw Error("gaussian smoothness must be in [0, 2]");
  if (output_cov.rows() != output_cov.cols() || output_cov.rows() == 0)
    throw Error("output covariance must be square");
  if ((output_cov - output_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + output_cov.cwiseAbs().maxCoeff()))
    throw Error("output covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(output_cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + output_cov.cwiseAbs().maxCoeff()))
    throw Error("output covariance must be positive semidefinite");
  return KernelSpec(DecomposableGaussianKernel{std::move(sigma), std::move(output_cov)}, smoothness);
}

KernelSpec KernelSpec::lti_control(Mat A, Mat B) {
  if (A.rows() != A.cols() || A.rows() == 0) throw Error("LTI state matrix must be square");
  if (B.rows() != A.rows()) throw Error("LTI input matrix row count must match state dimension");
  return KernelSpec(LtiControlKernel{std::move(A), std::move(B)}, 0);
}

std::string KernelSpec::kind_name() const {
  return std::visit(Overloaded{[](const GaussianKernel&) { return std::string("gaussian"); },
                               [](const LaplacianKernel&) { return std::string("laplacian"); },
                               [](const DecomposableGaussianKernel&) {
                                 return std::string("decomposable_gaussian");
                               },
                               [](const LtiControlKernel&) { return std::string("lti_control"); }},
                    variant_);
}

int KernelSpec::input_dim() const {
  return std::visit(Overloaded{[](const GaussianKernel& k) { return int(k.sigma.size()); },
                               [](const LaplacianKernel& k) { return k.dim; },
                               [](const DecomposableGaussianKernel& k) { return int(k.sigma.size()); },
                               [](const LtiControlKernel&) { return 1; }},
                    variant_);
}

int KernelSpec::output_dim() const {
  return std::visit(Overloaded{[](const GaussianKernel&) { return 1; },
                               [](const LaplacianKernel&) { return 1; },
                               [](const DecomposableGaussianKernel& k) { return int(k.output_cov.rows()); },
                               [](const LtiControlKernel& k) { return int(k.A.rows()); }},
                    variant_);
}

bool KernelSpec::translation_invariant() const {
  return !std::holds_alternative<LtiControlKernel>(variant_);
}

void KernelSpec::check_point(const Vec& x, const char* which) const {
  if (x.size() != input_dim())
    throw Error(std::string("point ") + which + " has dimension " + std::to_string(x.size()) +
                ", kernel expects " + std::to_string(input_dim()));
}

Mat KernelSpec::eval(const Vec& x, const Vec& x2) const {
  check_point(x, "x");
  check_point(x2, "x2");
  return std::visit(
      Overloaded{[&](const GaussianKernel& k) {
                   Mat out(1, 1);
                   out(0, 0) = std::exp(-0.5 * ((x - x2).array() / k.sigma.array()).square().sum());
                   return out;
                 },
                 [&](const LaplacianKernel& k) {
                   Mat out(1, 1);
                   out(0, 0) = std::exp(-k.rate * (x - x2).norm());
                   return out;
                 },
                 [&](const DecomposableGaussianKernel& k) {
                   const double s = std::exp(-0.5 * ((x - x2).array() / k.sigma.array()).square().sum());
                   return Mat(s * k.output_cov);
                 },
                 [&](const LtiControlKernel& k) { return lti_eval(k.A, k.B, x[0], x2[0]); }},
      variant_);
}

double KernelSpec::eval_partial(const MultiIndex& r1, const MultiIndex& r2, int q1, int q2,
                                const Vec& x, const Vec& x2) const {
  check_point(x, "x");
  check_point(x2, "x2");
  const int d = input_dim();
  if (r1.dim() != d || r2.dim() != d) throw Error("multi-index dimension does not match kernel input dimension");
  const int Q = output_dim();
  if (q1 < 0 || q1 >= Q || q2 < 0 || q2 >= Q) throw Error("output index out of range");
  const int o1 = r1.order(), o2 = r2.order();
  const bool any = o1 > 0 || o2 > 0;
  if (std::holds_alternative<LaplacianKernel>(variant_) && any) throw Error("kernel not differentiable");
  if (o1 > smoothness_ || o2 > smoothness_)
    throw Error("derivative order " + std::to_string(std::max(o1, o2)) + " exceeds kernel smoothness " +
                std::to_string(smoothness_));

  auto gaussian_part = [&](const Vec& sigma) {
    double v = (o2 % 2 == 0) ? 1.0 : -1.0;
    for (int i = 0; i < d; ++i) v *= gauss_derivative(r1[i] + r2[i], x[i] - x2[i], sigma[i]);
    return v;
  };
  return std::visit(
      Overloaded{[&](const GaussianKernel& k) { return gaussian_part(k.sigma); },
                 [&](const LaplacianKernel& k) { return std::exp(-k.rate * (x - x2).norm()); },
                 [&](const DecomposableGaussianKernel& k) {
                   return gaussian_part(k.sigma) * k.output_cov(q1, q2);
                 },
                 [&](const LtiControlKernel& k) { return lti_eval(k.A, k.B, x[0], x2[0])(q1, q2); }},
      variant_);
}

std::string KernelSpec::fingerprint() const {
  std::ostringstream os;
  os << kind_name() << ":s=" << smoothness_ << ':';
  std::visit(Overloaded{[&](const GaussianKernel& k) { append_vec(os, k.sigma); },
                        [&](const LaplacianKernel& k) { os << fmt(k.rate) << ",d=" << k.dim; },
                        [&](const DecomposableGaussianKernel& k) {
                          append_vec(os, k.sigma);
                          append_vec(os, k.output_cov);
                        },
                        [&](const LtiControlKernel& k) {
                          append_vec(os, k.A);
                          append_vec(os, k.B);
                        }},
             variant_);
  return os.str();
}

Mat lti_eval(const Mat& A, const Mat& B, double s, double t) {
  if (s < 0 || t < 0) throw Error("LTI kernel times must be nonnegative");
  const Eigen::Index Q = A.rows();
  const double m = std::min(s, t);
  if (m == 0.0) return Mat::Zero(Q, Q);
  Mat C = Mat::Zero(2 * Q, 2 * Q);
  C.topLeftCorner(Q, Q) = -A;
  C.topRightCorner(Q, Q) = B * B.transpose();
  C.bottomRightCorner(Q, Q) = A.transpose();
  const Mat F = (C * m).exp();
  const Mat W = F.bottomRightCorner(Q, Q).transpose() * F.topRightCorner(Q, Q);
  Mat out = W;
  if (s > m) out = Mat((A * (s - m)).exp()) * out;
  if (t > m) out = out * Mat((A.transpose() * (t - m)).exp());
  return out;
}

}  // namespace shapekernel
