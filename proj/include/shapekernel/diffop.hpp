#pragma once

#include <string>
#include <vector>

#include "shapekernel/kernel.hpp"

namespace shapekernel {

struct FunctionalTerm {
  int output = 0;
  MultiIndex order;
  double coeff = 1.0;
};

// l(f)(x) = sum_k coeff_k * d^{order_k} f_{output_k}(x).
class DiffFunctional {
 public:
  DiffFunctional() = default;
  explicit DiffFunctional(std::vector<FunctionalTerm> terms);

  static DiffFunctional value(int dim, int output = 0, double coeff = 1.0);
  static DiffFunctional partial(MultiIndex order, int output = 0, double coeff = 1.0);

  const std::vector<FunctionalTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  int dim() const;
  int max_order() const;

  DiffFunctional scaled(double c) const;
  DiffFunctional operator+(const DiffFunctional& other) const;

  // Sorted, merged, zero-free textual form; equal for equal functionals.
  std::string canonical_key() const;

 private:
  void normalize();
  std::vector<FunctionalTerm> terms_;
};

// Symmetric P x P array of functionals.
class SdpOperator {
 public:
  SdpOperator() = default;
  explicit SdpOperator(std::vector<std::vector<DiffFunctional>> entries);
  static SdpOperator scalar(DiffFunctional d);

  int size() const { return static_cast<int>(entries_.size()); }
  const DiffFunctional& entry(int p1, int p2) const { return entries_[p1][p2]; }

  // sum_{p1,p2} u_p1 u_p2 D_{p1,p2}
  DiffFunctional contracted(const Vec& u) const;
  std::string fingerprint() const;

 private:
  std::vector<std::vector<DiffFunctional>> entries_;
};

struct Atom {
  Vec point;
  DiffFunctional functional;
};

std::string atom_key(const Atom& a);

// <l1 K(., x1), l2 K(., x2)>_K
double atom_inner(const Atom& a1, const Atom& a2, const KernelSpec& kernel);

struct GramFactor {
  Mat gram;
  Mat lower;  // gram + jitter * I = lower * lower^T
  double jitter = 0.0;
};

Mat gram_matrix(const std::vector<Atom>& basis, const KernelSpec& kernel);
GramFactor factor_gram(Mat gram);
GramFactor gram(const std::vector<Atom>& basis, const KernelSpec& kernel);

// f = sum_j coeffs_j * basis_j, plus a bias vector handled by the problem.
class Model {
 public:
  Model(KernelSpec kernel, std::vector<Atom> basis, Vec coeffs, Vec bias = Vec());
  Model(KernelSpec kernel, std::vector<Atom> basis, Vec coeffs, Vec bias, double norm);
  static Model zero(KernelSpec kernel);

  const KernelSpec& kernel() const { return kernel_; }
  const std::vector<Atom>& basis() const { return basis_; }
  const Vec& coeffs() const { return coeffs_; }
  const Vec& bias() const { return bias_; }
  double norm() const { return norm_; }

 private:
  KernelSpec kernel_;
  std::vector<Atom> basis_;
  Vec coeffs_;
  Vec bias_;
  double norm_ = 0.0;
};

double apply(const DiffFunctional& D, const Model& model, const Vec& x);
Vec eval_model(const Model& model, const Vec& x);

}  // namespace shapekernel
