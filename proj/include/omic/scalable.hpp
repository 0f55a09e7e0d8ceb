#pragma once

#include "omic/prox.hpp"
#include "omic/solver.hpp"

namespace omic {

struct AlsOptions {
  Index max_rank = 50;
  double inner_tol = 1e-4;
  int inner_max_iters = 100;
  std::uint64_t seed = 0;
  int fixed_inner_iters = 0;  // > 0: run exactly this many sweeps (benchmarking)
};

/// Per-component low-rank factors of a thresholded matrix, each factor living
/// inside its component's subspace.
struct FactorComponents {
  int K = 0;
  int L = 0;
  std::vector<LowRankFactor> factors;

  FactorComponents() = default;
  FactorComponents(int k, int l, Index m, Index n) : K(k), L(l) {
    factors.reserve(k * l);
    for (int i = 0; i < k * l; ++i) factors.push_back(LowRankFactor::zero(m, n));
  }

  LowRankFactor& at(int k, int l) { return factors[k * L + l]; }
  const LowRankFactor& at(int k, int l) const { return factors[k * L + l]; }

  Index total_rank() const {
    Index r = 0;
    for (const auto& f : factors) r += f.rank();
    return r;
  }

  /// Factors concatenated into one (U, d, V) triple; valid for products since
  /// distinct components live in mutually orthogonal subspaces.
  LowRankFactor concatenated(Index m, Index n) const;

  /// Frobenius norms per component.
  Matrix norms() const {
    Matrix out = Matrix::Zero(K, L);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) out(k, l) = at(k, l).frobenius_norm();
    return out;
  }
};

/// Mutable ALS state kept across outer iterations for warm starts.
struct AlsState {
  std::vector<LowRankFactor> cells;  // loop state per component (may be empty)
};

struct SvtAlsResult {
  FactorComponents components;
  Matrix nuclear;  // K x L, sum of surviving singular values per component
  std::vector<std::string> warnings;
  bool rank_cap_hit = false;
};

/// Rank-restricted generalized singular value thresholding of a
/// sparse-plus-low-rank target via alternating least squares. Vector-shaped
/// components (width 1 on either side with a known direction) are thresholded
/// in closed form. No m x n dense matrix is ever formed. When the low-rank
/// part of the target is available split per component (z_cells), the cell
/// solves multiply only against their own share.
SvtAlsResult svt_als(const SparsePlusLowRank& z, const BasisFamily& family,
                     const HyperParams& params, const AlsOptions& opts,
                     AlsState* state = nullptr,
                     const FactorComponents* z_cells = nullptr);

struct ScalableFitResult {
  FactorComponents components;
  SolveTrace trace;
  std::vector<std::string> warnings;

  bool rank_cap_hit() const {
    for (const auto& w : warnings)
      if (w.find("rank cap") != std::string::npos) return true;
    return false;
  }
};

/// Scalable solver: outer iterative imputation holding the target as
/// observed-residual sparse part plus the current low-rank model, with svt_als
/// as the inner thresholding step. Component ALS solvers are warm-started
/// across outer iterations.
ScalableFitResult fit_scalable(const SparseObservations& obs,
                               const BasisFamily& family, const HyperParams& params,
                               const AlsOptions& als_opts,
                               const SolveOptions& outer_opts = {});

/// Row-major cache for fast repeated entry prediction from factors.
struct PredictCache {
  RowMatrix ud;  // m x r, U * diag(d)
  RowMatrix v;   // n x r

  PredictCache() = default;
  explicit PredictCache(const LowRankFactor& f)
      : ud(f.rank() > 0 ? RowMatrix(f.U * f.d.asDiagonal()) : RowMatrix::Zero(f.rows(), 0)),
        v(f.V) {}

  double operator()(Index i, Index j) const {
    if (ud.cols() == 0) return 0.0;
    return ud.row(i).dot(v.row(j));
  }
};

}  // namespace omic
