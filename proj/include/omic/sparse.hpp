#pragma once

#include <vector>

#include "omic/types.hpp"

namespace omic {

/// Multiset of observed (row, col, value) triplets. Duplicate coordinates are
/// legal and count with multiplicity wherever the observed entries enter a sum.
struct SparseObservations {
  struct Entry {
    Index i = 0;
    Index j = 0;
    double v = 0.0;
  };

  Index rows = 0;
  Index cols = 0;
  std::vector<Entry> entries;

  SparseObservations() = default;
  SparseObservations(Index m, Index n) : rows(m), cols(n) {}

  Index nnz() const { return static_cast<Index>(entries.size()); }

  void add(Index i, Index j, double v) {
    require(i >= 0 && i < rows && j >= 0 && j < cols,
            "observation index out of range");
    require(std::isfinite(v), "observation value must be finite");
    entries.push_back({i, j, v});
  }

  /// Dense matrix with observed entries filled in and zeros elsewhere.
  /// Duplicate coordinates keep the value of the last occurrence; use
  /// UniqueObservations when multiplicities matter.
  Matrix dense() const {
    Matrix out = Matrix::Zero(rows, cols);
    for (const auto& e : entries) out(e.i, e.j) = e.v;
    return out;
  }
};

/// Deduplicated view of a SparseObservations: one record per coordinate with
/// its multiplicity, mean value and the constant sum of squared deviations
/// from that mean (the part of the square loss that no predictor can remove).
struct UniqueObservations {
  struct Record {
    Index i = 0;
    Index j = 0;
    double weight = 0.0;  // multiplicity
    double mean = 0.0;
  };

  Index rows = 0;
  Index cols = 0;
  std::vector<Record> records;
  double max_weight = 0.0;
  double constant_loss = 0.0;  // (1/2) sum over duplicates of (v - mean)^2

  static UniqueObservations from(const SparseObservations& obs);

  /// (1/2) * sum_multiset (value - pred(i,j))^2, given per-record predictions
  /// aligned with `records`.
  double data_loss(const std::vector<double>& preds) const;
};

/// U * diag(d) * V^T held in factored form. U and V have orthonormal columns,
/// d is nonnegative and nonincreasing.
struct LowRankFactor {
  Matrix U;   // m x r
  Vector d;   // r
  Matrix V;   // n x r

  LowRankFactor() = default;
  LowRankFactor(Matrix u, Vector dd, Matrix v)
      : U(std::move(u)), d(std::move(dd)), V(std::move(v)) {}

  static LowRankFactor zero(Index m, Index n) {
    return LowRankFactor(Matrix::Zero(m, 0), Vector::Zero(0), Matrix::Zero(n, 0));
  }

  Index rows() const { return U.rows(); }
  Index cols() const { return V.rows(); }
  Index rank() const { return d.size(); }

  Matrix dense() const {
    if (rank() == 0) return Matrix::Zero(rows(), cols());
    return U * d.asDiagonal() * V.transpose();
  }

  double frobenius_norm() const { return d.norm(); }

  /// Max deviation from column-orthonormality and from nonincreasing order;
  /// throws InvalidInput when the declared invariants are broken.
  void check_invariants(double tol = 1e-10) const;
};

/// Z = Z_sp + U * diag(d) * V^T, never materialized densely.
struct SparsePlusLowRank {
  SpMatrix sparse;       // m x n, compressed
  LowRankFactor lowrank; // m x n in factored form

  SparsePlusLowRank() = default;
  SparsePlusLowRank(SpMatrix sp, LowRankFactor lr)
      : sparse(std::move(sp)), lowrank(std::move(lr)) {
    require(sparse.rows() == lowrank.rows() && sparse.cols() == lowrank.cols(),
            "sparse and low-rank parts must have the same shape");
  }

  Index rows() const { return sparse.rows(); }
  Index cols() const { return sparse.cols(); }

  Matrix dense() const { return Matrix(sparse) + lowrank.dense(); }
};

}  // namespace omic
