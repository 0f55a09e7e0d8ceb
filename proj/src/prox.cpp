#include "omic/prox.hpp"

namespace omic {

namespace {

// Thresholded SVD of a core matrix, dropping zeroed directions. Vector-shaped
// cores (either dimension 1) reduce to normalizing the vector.
LowRankFactor svt_factor(const Matrix& m, double lambda, double* nuclear_out) {
  const Index rows = m.rows(), cols = m.cols();
  if (m.size() == 0) {
    if (nuclear_out) *nuclear_out = 0.0;
    return LowRankFactor::zero(rows, cols);
  }
  if (rows == 1 || cols == 1) {
    const double sigma = m.norm();
    const double kept = std::max(sigma - lambda, 0.0);
    if (nuclear_out) *nuclear_out = kept;
    if (kept <= 0.0 || sigma <= 0.0) return LowRankFactor::zero(rows, cols);
    Matrix u, v;
    if (cols == 1) {
      u = m / sigma;
      v = Matrix::Ones(1, 1);
    } else {
      u = Matrix::Ones(1, 1);
      v = m.transpose() / sigma;
    }
    canonicalize_signs(u, v);
    Vector d(1);
    d[0] = kept;
    return LowRankFactor(std::move(u), std::move(d), std::move(v));
  }

  LowRankFactor f = full_svd(m);
  Index keep = 0;
  double nuclear = 0.0;
  for (Index i = 0; i < f.rank(); ++i) {
    const double s = f.d[i] - lambda;
    if (s > 0.0) {
      f.d[keep] = s;
      nuclear += s;
      if (keep != i) {
        f.U.col(keep) = f.U.col(i);
        f.V.col(keep) = f.V.col(i);
      }
      ++keep;
    }
  }
  if (nuclear_out) *nuclear_out = nuclear;
  return LowRankFactor(f.U.leftCols(keep), f.d.head(keep), f.V.leftCols(keep));
}

// X^(k)^T Z for one side block; Z columns untouched.
Matrix left_sandwich(const BasisSide& side, int k, const Matrix& z) {
  if (side.is_identity()) return z;
  return side.materialized(k).transpose() * z;
}

Matrix right_sandwich(const BasisSide& side, int l, const Matrix& z) {
  if (side.is_identity()) return z;
  return z * side.materialized(l);
}

}  // namespace

Matrix svt(const Matrix& a, double lambda) {
  require(lambda >= 0.0 && !std::isnan(lambda), "svt: lambda must be nonnegative");
  require(a.allFinite(), "svt: non-finite input");
  if (lambda == 0.0) return a;
  if (!std::isfinite(lambda)) return Matrix::Zero(a.rows(), a.cols());
  return svt_factor(a, lambda, nullptr).dense();
}

GsvtResult generalized_svt(const Matrix& z, const BasisFamily& family,
                           const HyperParams& params) {
  require(z.rows() == family.rows() && z.cols() == family.cols(),
          "generalized_svt: dimension mismatch");
  require(params.K() == family.K() && params.L() == family.L(),
          "generalized_svt: hyperparameter shape mismatch");
  require(z.allFinite(), "generalized_svt: non-finite input");

  const int K = family.K(), L = family.L();
  GsvtResult out;
  out.components = DenseComponents(K, L);
  out.nuclear = Matrix::Zero(K, L);
  out.factors.resize(K * L);
  out.assembled = Matrix::Zero(z.rows(), z.cols());

  for (int k = 0; k < K; ++k) {
    const Index d1 = family.row_side().block(k).width;
    Matrix zk;  // X^(k)^T Z, computed once per row block
    bool zk_ready = false;
    for (int l = 0; l < L; ++l) {
      const Index d2 = family.col_side().block(l).width;
      out.factors[k * L + l] = LowRankFactor::zero(d1, d2);
      if (!params.finite(k, l) || d1 == 0 || d2 == 0) continue;
      if (!zk_ready) {
        zk = left_sandwich(family.row_side(), k, z);
        zk_ready = true;
      }
      Matrix core = right_sandwich(family.col_side(), l, zk);
      const double lambda = params(k, l);
      double nuclear = 0.0;
      if (lambda == 0.0) {
        // S_0 is the identity; still record the nuclear norm for the objective.
        LowRankFactor f = full_svd(core);
        nuclear = f.d.sum();
        out.factors[k * L + l] = std::move(f);
        out.components.at(k, l) = std::move(core);
      } else {
        LowRankFactor f = svt_factor(core, lambda, &nuclear);
        out.components.at(k, l) = f.dense();
        out.factors[k * L + l] = std::move(f);
      }
      out.nuclear(k, l) = nuclear;

      const Matrix& m = out.components.at(k, l);
      if (family.row_side().is_identity() && family.col_side().is_identity()) {
        out.assembled += m;
      } else {
        out.assembled.noalias() += family.row_side().materialized(k) *
                                   (m * family.col_side().materialized(l).transpose());
      }
    }
  }
  return out;
}

DenseComponents decompose(const Matrix& r, const BasisFamily& family) {
  require(r.rows() == family.rows() && r.cols() == family.cols(),
          "decompose: dimension mismatch");
  DenseComponents out(family.K(), family.L());
  for (int k = 0; k < family.K(); ++k) {
    if (family.row_side().block(k).width == 0) continue;
    const Matrix zk = left_sandwich(family.row_side(), k, r);
    for (int l = 0; l < family.L(); ++l) {
      if (family.col_side().block(l).width == 0) continue;
      out.at(k, l) = right_sandwich(family.col_side(), l, zk);
    }
  }
  return out;
}

Matrix assemble(const DenseComponents& components, const BasisFamily& family) {
  require(components.K == family.K() && components.L == family.L(),
          "assemble: component shape mismatch");
  Matrix out = Matrix::Zero(family.rows(), family.cols());
  for (int k = 0; k < family.K(); ++k)
    for (int l = 0; l < family.L(); ++l) {
      if (components.empty(k, l)) continue;
      const Matrix& m = components.at(k, l);
      if (family.row_side().is_identity() && family.col_side().is_identity()) {
        out += m;
      } else {
        out.noalias() += family.row_side().materialized(k) *
                         (m * family.col_side().materialized(l).transpose());
      }
    }
  return out;
}

}  // namespace omic
