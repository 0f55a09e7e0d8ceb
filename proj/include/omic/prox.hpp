#pragma once

#include <vector>

#include "omic/bases.hpp"
#include "omic/numerics.hpp"

namespace omic {

/// Per-component thresholding parameters. An infinite entry excludes the
/// (k, l) component from the model entirely.
struct HyperParams {
  Matrix lam;  // K x L, entries >= 0 or +inf

  HyperParams() = default;
  HyperParams(int K, int L, double value) : lam(Matrix::Constant(K, L, value)) {
    check();
  }
  explicit HyperParams(Matrix m) : lam(std::move(m)) { check(); }

  static HyperParams all_infinite(int K, int L) { return HyperParams(K, L, kInf); }

  int K() const { return static_cast<int>(lam.rows()); }
  int L() const { return static_cast<int>(lam.cols()); }
  double operator()(int k, int l) const { return lam(k, l); }
  bool finite(int k, int l) const { return std::isfinite(lam(k, l)); }

  /// All components infinite except (k, l), which is set to `value`.
  HyperParams pinned(int k, int l, double value) const {
    HyperParams p = all_infinite(K(), L());
    p.lam(k, l) = value;
    return p;
  }

  HyperParams scaled(double factor) const {
    Matrix m = lam * factor;
    return HyperParams(std::move(m));
  }

  void check() const {
    for (Index k = 0; k < lam.rows(); ++k)
      for (Index l = 0; l < lam.cols(); ++l)
        require(lam(k, l) >= 0.0 && !std::isnan(lam(k, l)),
                "hyperparameters must be nonnegative");
  }
};

/// Core matrices M^(k,l), one per basis pair, stored row-major in k. Excluded
/// components (lambda = +inf) hold empty matrices and read as zero.
struct DenseComponents {
  int K = 0;
  int L = 0;
  std::vector<Matrix> cores;

  DenseComponents() = default;
  DenseComponents(int k, int l) : K(k), L(l), cores(k * l) {}

  Matrix& at(int k, int l) { return cores[k * L + l]; }
  const Matrix& at(int k, int l) const { return cores[k * L + l]; }
  bool empty(int k, int l) const { return at(k, l).size() == 0; }

  /// Frobenius norms per component (zero for excluded components).
  Matrix norms() const {
    Matrix out = Matrix::Zero(K, L);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l)
        if (!empty(k, l)) out(k, l) = at(k, l).norm();
    return out;
  }
};

/// Singular value thresholding: sum_i (sigma_i - lambda)_+ u_i v_i^T.
Matrix svt(const Matrix& a, double lambda);

struct GsvtResult {
  DenseComponents components;       // thresholded cores
  Matrix assembled;                 // sum_kl X^(k) M^(k,l) Y^(l)^T
  Matrix nuclear;                   // K x L nuclear norms of the thresholded cores
  std::vector<LowRankFactor> factors;  // thresholded SVDs of the cores, zeros dropped
  const LowRankFactor& factor(int k, int l) const { return factors[k * nuclear.cols() + l]; }
};

/// Generalized singular value thresholding for the dense reference path:
/// per component, S_lambda applied to (X^(k))^T Z Y^(l); the assembled matrix
/// is the minimizer of (1/2)||Ztilde - Z||_F^2 + sum lambda_kl ||M^(k,l)||_*.
GsvtResult generalized_svt(const Matrix& z, const BasisFamily& family,
                           const HyperParams& params);

/// Exact component decomposition R^(k,l) = (X^(k))^T R Y^(l) for every pair.
DenseComponents decompose(const Matrix& r, const BasisFamily& family);

/// Reassemble sum_kl X^(k) M^(k,l) Y^(l)^T.
Matrix assemble(const DenseComponents& components, const BasisFamily& family);

}  // namespace omic
