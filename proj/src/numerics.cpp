#include "omic/numerics.hpp"

#include <Eigen/SVD>
#include <algorithm>

namespace omic {

namespace {

void require_finite(const Matrix& a, const char* who) {
  if (!a.allFinite()) throw InvalidInput(std::string(who) + ": non-finite input values");
}

}  // namespace

void thin_svd_raw(const Matrix& a, Matrix& u, Vector& s, Matrix& v) {
  // Tall or wide matrices: QR first, then decompose the small triangle.
  if (a.rows() >= 3 * a.cols() && a.cols() >= 1) {
    Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix r =
        qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    Matrix ru, rv;
    Vector rs;
    thin_svd_raw(r, ru, rs, rv);
    u = qr.householderQ() * Matrix::Identity(a.rows(), a.cols()) * ru;
    s = std::move(rs);
    v = std::move(rv);
    return;
  }
  if (a.cols() >= 3 * a.rows() && a.rows() >= 1) {
    Matrix tu, tv;
    Vector ts;
    thin_svd_raw(a.transpose(), tv, ts, tu);
    u = std::move(tu);
    s = std::move(ts);
    v = std::move(tv);
    return;
  }
  if (std::min(a.rows(), a.cols()) <= 16) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    s = svd.singularValues();
    v = svd.matrixV();
    return;
  }
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u = svd.matrixU();
  s = svd.singularValues();
  v = svd.matrixV();
  if (u.allFinite() && s.allFinite() && v.allFinite()) return;
  Eigen::JacobiSVD<Matrix> fallback(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u = fallback.matrixU();
  s = fallback.singularValues();
  v = fallback.matrixV();
}

UniqueObservations UniqueObservations::from(const SparseObservations& obs) {
  UniqueObservations out;
  out.rows = obs.rows;
  out.cols = obs.cols;
  if (obs.entries.empty()) return out;

  std::vector<SparseObservations::Entry> sorted = obs.entries;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.j != b.j ? a.j < b.j : a.i < b.i;
  });

  std::size_t k = 0;
  while (k < sorted.size()) {
    std::size_t e = k;
    double sum = 0.0;
    while (e < sorted.size() && sorted[e].i == sorted[k].i && sorted[e].j == sorted[k].j) {
      sum += sorted[e].v;
      ++e;
    }
    const double w = static_cast<double>(e - k);
    const double mean = sum / w;
    for (std::size_t t = k; t < e; ++t) {
      const double dev = sorted[t].v - mean;
      out.constant_loss += 0.5 * dev * dev;
    }
    out.records.push_back({sorted[k].i, sorted[k].j, w, mean});
    out.max_weight = std::max(out.max_weight, w);
    k = e;
  }
  return out;
}

double UniqueObservations::data_loss(const std::vector<double>& preds) const {
  require(preds.size() == records.size(), "data_loss: prediction count mismatch");
  double loss = constant_loss;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const double r = records[k].mean - preds[k];
    loss += 0.5 * records[k].weight * r * r;
  }
  return loss;
}

void LowRankFactor::check_invariants(double tol) const {
  require(U.cols() == d.size() && V.cols() == d.size(),
          "LowRankFactor: factor widths disagree");
  if (rank() == 0) return;
  const double du = (U.transpose() * U - Matrix::Identity(rank(), rank())).cwiseAbs().maxCoeff();
  const double dv = (V.transpose() * V - Matrix::Identity(rank(), rank())).cwiseAbs().maxCoeff();
  require(du <= tol && dv <= tol, "LowRankFactor: factors not orthonormal");
  for (Index i = 0; i < rank(); ++i) {
    require(d[i] >= 0.0, "LowRankFactor: negative singular value");
    if (i > 0) require(d[i] <= d[i - 1] + tol, "LowRankFactor: d not nonincreasing");
  }
}

double frobenius_norm(const Matrix& a) { return a.norm(); }

double nuclear_norm(const Matrix& a) {
  require_finite(a, "nuclear_norm");
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1 || a.cols() == 1) return a.norm();
  Eigen::BDCSVD<Matrix> svd(a);
  if (svd.singularValues().allFinite()) return svd.singularValues().sum();
  return Eigen::JacobiSVD<Matrix>(a).singularValues().sum();
}

void canonicalize_signs(Matrix& u, Matrix& v) {
  for (Index k = 0; k < u.cols(); ++k) {
    Index arg = 0;
    u.col(k).cwiseAbs().maxCoeff(&arg);
    if (u(arg, k) < 0.0) {
      u.col(k) = -u.col(k);
      if (k < v.cols()) v.col(k) = -v.col(k);
    }
  }
}

LowRankFactor full_svd(const Matrix& a) {
  require_finite(a, "svd");
  Matrix u, v;
  Vector s;
  thin_svd_raw(a, u, s, v);
  canonicalize_signs(u, v);
  return LowRankFactor(std::move(u), std::move(s), std::move(v));
}

LowRankFactor truncated_svd(const Matrix& a, Index r) {
  require(r >= 0 && r <= std::min(a.rows(), a.cols()),
          "truncated_svd: rank out of range");
  LowRankFactor f = full_svd(a);
  if (r == f.rank()) return f;
  return LowRankFactor(f.U.leftCols(r), f.d.head(r), f.V.leftCols(r));
}

Matrix splr_mul_right(const SparsePlusLowRank& z, const Matrix& w) {
  require(w.rows() == z.cols(), "splr_mul_right: dimension mismatch");
  Matrix out = z.sparse * w;
  const auto& lr = z.lowrank;
  if (lr.rank() > 0) out.noalias() += lr.U * (lr.d.asDiagonal() * (lr.V.transpose() * w));
  return out;
}

Matrix splr_mul_left(const SparsePlusLowRank& z, const Matrix& w) {
  require(w.rows() == z.rows(), "splr_mul_left: dimension mismatch");
  Matrix out = z.sparse.transpose() * w;
  const auto& lr = z.lowrank;
  if (lr.rank() > 0) out.noalias() += lr.V * (lr.d.asDiagonal() * (lr.U.transpose() * w));
  return out;
}

}  // namespace omic
