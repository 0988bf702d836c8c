#include "shapekernel/diffop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "shapekernel/error.hpp"

namespace shapekernel {

DiffFunctional::DiffFunctional(std::vector<FunctionalTerm> terms) : terms_(std::move(terms)) {
  normalize();
  if (terms_.empty()) throw Error("differential functional needs at least one nonzero term");
}

DiffFunctional DiffFunctional::value(int dim, int output, double coeff) {
  return DiffFunctional({FunctionalTerm{output, MultiIndex(dim), coeff}});
}

DiffFunctional DiffFunctional::partial(MultiIndex order, int output, double coeff) {
  return DiffFunctional({FunctionalTerm{output, std::move(order), coeff}});
}

void DiffFunctional::normalize() {
  if (!terms_.empty()) {
    const int d = terms_.front().order.dim();
    for (const auto& t : terms_) {
      if (t.order.dim() != d) throw Error("functional terms have inconsistent input dimension");
      if (t.output < 0) throw Error("negative output index in functional");
      for (int i = 0; i < d; ++i)
        if (t.order[i] < 0) throw Error("negative derivative order in functional");
    }
  }
  std::sort(terms_.begin(), terms_.end(), [](const FunctionalTerm& a, const FunctionalTerm& b) {
    if (a.output != b.output) return a.output < b.output;
    return a.order < b.order;
  });
  std::vector<FunctionalTerm> merged;
  for (const auto& t : terms_) {
    if (!merged.empty() && merged.back().output == t.output && merged.back().order == t.order)
      merged.back().coeff += t.coeff;
    else
      merged.push_back(t);
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(), [](const FunctionalTerm& t) { return t.coeff == 0.0; }),
               merged.end());
  terms_ = std::move(merged);
}

int DiffFunctional::dim() const { return terms_.empty() ? 0 : terms_.front().order.dim(); }

int DiffFunctional::max_order() const {
  int m = 0;
  for (const auto& t : terms_) m = std::max(m, t.order.order());
  return m;
}

DiffFunctional DiffFunctional::scaled(double c) const {
  if (c == 0.0) throw Error("scaling a functional by zero yields an empty functional");
  std::vector<FunctionalTerm> t = terms_;
  for (auto& x : t) x.coeff *= c;
  return DiffFunctional(std::move(t));
}

DiffFunctional DiffFunctional::operator+(const DiffFunctional& other) const {
  std::vector<FunctionalTerm> t = terms_;
  t.insert(t.end(), other.terms_.begin(), other.terms_.end());
  return DiffFunctional(std::move(t));
}

std::string DiffFunctional::canonical_key() const {
  std::ostringstream os;
  char buf[40];
  for (const auto& t : terms_) {
    os << 'q' << t.output << 'r';
    for (int i = 0; i < t.order.dim(); ++i) os << (i ? "." : "") << t.order[i];
    std::snprintf(buf, sizeof buf, "%.12g", t.coeff);
    os << 'c' << buf << ';';
  }
  return os.str();
}

SdpOperator::SdpOperator(std::vector<std::vector<DiffFunctional>> entries) : entries_(std::move(entries)) {
  const int P = size();
  if (P == 0) throw Error("SDP operator must have size at least 1");
  for (const auto& row : entries_)
    if (int(row.size()) != P) throw Error("SDP operator entry array must be square");
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < i; ++j)
      if (entries_[i][j].canonical_key() != entries_[j][i].canonical_key())
        throw Error("SDP operator entries must be symmetric");
}

SdpOperator SdpOperator::scalar(DiffFunctional d) { return SdpOperator({{std::move(d)}}); }

DiffFunctional SdpOperator::contracted(const Vec& u) const {
  if (u.size() != size()) throw Error("direction size does not match operator size");
  std::vector<FunctionalTerm> terms;
  for (int i = 0; i < size(); ++i)
    for (int j = 0; j < size(); ++j) {
      const double w = u[i] * u[j];
      if (w == 0.0) continue;
      for (auto t : entries_[i][j].terms()) {
        t.coeff *= w;
        terms.push_back(t);
      }
    }
  return DiffFunctional(std::move(terms));
}

std::string SdpOperator::fingerprint() const {
  std::ostringstream os;
  os << 'P' << size();
  for (int i = 0; i < size(); ++i)
    for (int j = i; j < size(); ++j) os << '|' << entries_[i][j].canonical_key();
  return os.str();
}

std::string atom_key(const Atom& a) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < a.point.size(); ++i) os << std::llround(a.point[i] * 1e12) << ',';
  os << '#' << a.functional.canonical_key();
  return os.str();
}

double atom_inner(const Atom& a1, const Atom& a2, const KernelSpec& kernel) {
  double s = 0.0;
  for (const auto& t1 : a1.functional.terms())
    for (const auto& t2 : a2.functional.terms())
      s += t1.coeff * t2.coeff * kernel.eval_partial(t1.order, t2.order, t1.output, t2.output, a1.point, a2.point);
  return s;
}

Mat gram_matrix(const std::vector<Atom>& basis, const KernelSpec& kernel) {
  const Eigen::Index A = static_cast<Eigen::Index>(basis.size());
  Mat G(A, A);
  for (Eigen::Index i = 0; i < A; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) G(i, j) = G(j, i) = atom_inner(basis[i], basis[j], kernel);
  return G;
}

GramFactor factor_gram(Mat G) {
  const Eigen::Index A = G.rows();
  if (A == 0) throw Error("Gram matrix of an empty basis");
  const double scale = std::max(G.trace() / double(A), 1e-300);
  {
    // no jitter when every pivot stays above the smallest jitter level
    Eigen::LLT<Mat> llt(G);
    if (llt.info() == Eigen::Success) {
      Mat L = llt.matrixL();
      if (L.diagonal().array().square().minCoeff() >= 1e-10 * scale) return GramFactor{std::move(G), std::move(L), 0.0};
    }
  }
  for (double eps = 1e-10; eps <= 1e-6 * 1.0001; eps *= 10.0) {
    const double jitter = eps * scale;
    Mat J = G;
    J.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(J);
    if (llt.info() == Eigen::Success) {
      Mat L = llt.matrixL();
      return GramFactor{std::move(G), std::move(L), jitter};
    }
  }
  throw Error("Gram numerically indefinite");
}

GramFactor gram(const std::vector<Atom>& basis, const KernelSpec& kernel) {
  if (basis.empty()) throw Error("gram requires a non-empty basis");
  return factor_gram(gram_matrix(basis, kernel));
}

Model::Model(KernelSpec kernel, std::vector<Atom> basis, Vec coeffs, Vec bias)
    : kernel_(std::move(kernel)), basis_(std::move(basis)), coeffs_(std::move(coeffs)), bias_(std::move(bias)) {
  if (coeffs_.size() != Eigen::Index(basis_.size())) throw Error("model coefficient count differs from basis size");
  if (!basis_.empty()) {
    const Mat G = gram_matrix(basis_, kernel_);
    norm_ = std::sqrt(std::max(0.0, coeffs_.dot(G * coeffs_)));
  }
}

Model::Model(KernelSpec kernel, std::vector<Atom> basis, Vec coeffs, Vec bias, double norm)
    : kernel_(std::move(kernel)), basis_(std::move(basis)), coeffs_(std::move(coeffs)), bias_(std::move(bias)), norm_(norm) {
  if (coeffs_.size() != Eigen::Index(basis_.size())) throw Error("model coefficient count differs from basis size");
}

Model Model::zero(KernelSpec kernel) { return Model(std::move(kernel), {}, Vec(), Vec(), 0.0); }

double apply(const DiffFunctional& D, const Model& model, const Vec& x) {
  const Atom probe{x, D};
  double s = 0.0;
  const auto& basis = model.basis();
  for (size_t j = 0; j < basis.size(); ++j) {
    const double a = model.coeffs()[Eigen::Index(j)];
    if (a != 0.0) s += a * atom_inner(basis[j], probe, model.kernel());
  }
  return s;
}

Vec eval_model(const Model& model, const Vec& x) {
  const int Q = model.kernel().output_dim();
  const int d = model.kernel().input_dim();
  Vec out(Q);
  for (int q = 0; q < Q; ++q) out[q] = apply(DiffFunctional::value(d, q), model, x);
  return out;
}

}  // namespace shapekernel
