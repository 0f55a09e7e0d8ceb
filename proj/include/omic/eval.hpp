#pragma once

#include <optional>

#include "omic/bases.hpp"
#include "omic/data.hpp"
#include "omic/solver.hpp"

namespace omic {

/// Root-mean-square error between aligned value vectors.
double rmse(const std::vector<double>& truth, const std::vector<double>& pred);

/// Spearman rank correlation with mean ranks on ties. Returns NaN when either
/// argument has zero rank variance.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct BiasDeviation {
  double mbd = 0.0;  // |global gap|
  double ubd = 0.0;  // ||user-bias gap||_2
  double ibd = 0.0;  // ||item-bias gap||_2
};

BiasDeviation bias_deviation(double truth_global, const Vector& truth_user,
                             const Vector& truth_item, double est_global,
                             const Vector& est_user, const Vector& est_item);

struct SiBiases {
  double global = 0.0;
  Vector user;
  Vector item;
};

/// Post-hoc bias estimates for a dense prediction matrix: the global mean,
/// then row and column means of the global-residual matrix (both measured
/// against the same residual).
SiBiases si_bias_postprocess(const Matrix& r_hat);

/// Ground-truth biases of a fully known matrix, same formulas.
inline SiBiases matrix_biases(const Matrix& r) { return si_bias_postprocess(r); }

/// Sample-complexity bound value for the community setting (order-level; the
/// universal constant and the 1/eps^2 factor are dropped). `ratio` is the
/// largest community-size ratio; 1 for equal-size communities.
double bound_value(Index a, Index b, Index m, Index n, const Matrix& r_map,
                   const Matrix& c_map, double ratio = 1.0);

struct SampleComplexityOptions {
  double epsilon = 0.1;
  Index initial_count = 16;
  double growth = 1.3;
  SamplingMode mode = SamplingMode::kUniform;
  std::uint64_t ordering_seed = 0;
};

struct SampleComplexityResult {
  std::optional<Index> n_epsilon;  // nullopt: never reached epsilon
  std::vector<Index> counts;
  std::vector<double> rmses;  // held-out RMSE per sweep point
};

/// Minimum number of observed entries after which the held-out RMSE drops to
/// epsilon, measured along a nested observation sequence with warm-started
/// fits between sweep points.
SampleComplexityResult empirical_sample_complexity(const Matrix& truth,
                                                   const BasisFamily& family,
                                                   const HyperParams& params,
                                                   const SolveOptions& solver_opts,
                                                   const SampleComplexityOptions& opts);

}  // namespace omic
