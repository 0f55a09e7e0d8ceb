#pragma once

#include <functional>
#include <optional>

#include "omic/prox.hpp"

namespace omic {

struct SolveOptions {
  double tol = 1e-5;      // relative iterate-change threshold
  int max_iters = 500;
  bool record_trace = false;
};

struct TracePoint {
  double objective = 0.0;
  double iterate_change = 0.0;  // ||Z^{i+1} - Z^i||_F
};

struct SolveTrace {
  std::vector<TracePoint> points;  // only filled when record_trace is set
  int iterations = 0;
  bool converged = false;
  double final_objective = 0.0;
  double monotone_violation = 0.0;  // max positive jump of the objective
};

struct FitResult {
  DenseComponents components;
  SolveTrace trace;
};

/// Regularized loss: sum_kl lambda_kl ||M^(k,l)||_* plus half the squared
/// error over observed entries, duplicates counted with multiplicity.
/// A nonzero component with lambda = +inf is a contract violation.
double objective(const SparseObservations& obs, const DenseComponents& components,
                 const BasisFamily& family, const HyperParams& params);

/// Iterative imputation from Z^0 = 0 (or a warm start): impute unobserved
/// entries with the current iterate, apply generalized SVT, repeat until the
/// relative iterate change drops below tol. Non-convergence is flagged on the
/// trace, not thrown.
FitResult fit(const SparseObservations& obs, const BasisFamily& family,
              const HyperParams& params, const SolveOptions& opts = {},
              const DenseComponents* warm_start = nullptr);

/// One axis of a regularization-path grid: candidate values shared by a group
/// of tied components. Values are visited in decreasing order.
struct GridAxis {
  std::vector<std::pair<int, int>> cells;
  std::vector<double> values;
};

struct PathEntry {
  std::vector<int> value_index;  // per axis, index into its value list
  HyperParams params;
  DenseComponents components;
  SolveTrace trace;
};

/// Warm-started regularization path. Phase 1 solves each component alone over
/// its candidate values (warm starts along the sequence); phase 2 seeds every
/// grid cell with the sum of the matching single-component solutions and
/// iterates to convergence. `fixed` supplies lambdas for components outside
/// the axes; finite fixed values get their own single-value phase-1 solve.
std::vector<PathEntry> fit_path(const SparseObservations& obs,
                                const BasisFamily& family, const HyperParams& fixed,
                                std::vector<GridAxis> axes,
                                const SolveOptions& opts = {});

/// Log-spaced candidate values per component: `count` values from
/// sigma_max / 2 down to sigma_max / 100, where sigma_max is the largest
/// singular value of the component's projection of the zero-imputed target.
std::vector<double> default_grid(const SparseObservations& obs,
                                 const BasisFamily& family,
                                 const std::vector<std::pair<int, int>>& cells,
                                 int count = 8);

/// Nuclear-norm matrix completion without side information (K = L = 1).
FitResult softimpute(const SparseObservations& obs, double lambda,
                     const SolveOptions& opts = {});

struct BiasedSoftImpute {
  double global_bias = 0.0;
  Vector user_bias;  // m
  Vector item_bias;  // n
  FitResult residual_fit;

  double predict(Index i, Index j, const Matrix& residual_dense) const {
    return global_bias + user_bias[i] + item_bias[j] + residual_dense(i, j);
  }
};

/// Classic two-stage baseline: global/user/item means fitted sequentially on
/// residuals, then SoftImpute on what is left.
BiasedSoftImpute biased_softimpute(const SparseObservations& obs, double lambda,
                                   const SolveOptions& opts = {});

/// Largest singular value of the zero-imputed observation matrix projected
/// onto component (k, l).
double component_sigma_max(const SparseObservations& obs, const BasisFamily& family,
                           int k, int l);

}  // namespace omic
