#pragma once

#include <string>

#include "omic/eval.hpp"
#include "omic/model.hpp"

namespace omic {

/// One method's scores on a synthetic bias-mixture instance. Accuracy metrics
/// are measured on the unobserved entries against the full ground truth; bias
/// deviations compare against the ground-truth matrix biases.
struct SynthMethodResult {
  std::string method;  // "bomic", "bsi", "si"
  double rmse = 0.0;
  double spc = 0.0;
  double mbd = 0.0;
  double ubd = 0.0;
  double ibd = 0.0;
};

struct SynthBenchConfig {
  double alpha = 0.75;
  int gamma = 4;
  double p_obs = 0.3;
  Index m = 100;
  Index n = 100;
  double c = 100.0;
  std::uint64_t seed = 0;
  // Hyperparameter search budgets (validation-split selection).
  int bias_grid = 4;
  int residual_grid = 5;
  int baseline_grid = 6;
  SolveOptions solver{1e-5, 300, false};
};

/// Fit BOMIC, biased SoftImpute and SoftImpute on one synthetic instance with
/// per-method validation-selected hyperparameters; returns one row per method.
std::vector<SynthMethodResult> run_synth_bench_cell(const SynthBenchConfig& config);

struct BoundSweepConfig {
  int num_configs = 20;
  Index m_min = 100;
  Index m_max = 200;
  std::uint64_t seed = 0;
  double epsilon = 0.1;
  SamplingMode mode = SamplingMode::kUniform;
  SolveOptions solver{1e-5, 400, false};
  // Calibration instance for the once-and-for-all hyperparameter choice.
  double calibration_density = 0.3;
};

struct BoundConfigResult {
  int a = 0;
  int r = 0;
  double C = 0.0;
  Index m = 0;
  Index n_epsilon = 0;  // 0 when never reached
  bool reached = false;
  double bound = 0.0;
};

struct BoundSweepResult {
  std::vector<BoundConfigResult> configs;
  double lambda_comm = 0.0;      // calibrated community-component threshold
  double lambda_residual = 0.0;  // calibrated residual threshold
  double spearman_value = 0.0;   // over configs that reached epsilon
};

/// Sample-complexity sweep over random community-structured instances,
/// comparing the measured N_epsilon with the analytic bound expression.
BoundSweepResult run_bound_sweep(const BoundSweepConfig& config);

}  // namespace omic
