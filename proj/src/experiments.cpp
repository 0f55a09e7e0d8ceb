#include "omic/experiments.hpp"

#include <algorithm>

#include "omic/rng.hpp"

namespace omic {

namespace {

struct HoldoutView {
  std::vector<std::pair<Index, Index>> cells;  // unobserved coordinates
  std::vector<double> truth;
};

HoldoutView unobserved_entries(const SyntheticInstance& inst) {
  Matrix observed = Matrix::Zero(inst.full.rows(), inst.full.cols());
  for (const auto& e : inst.observed.entries) observed(e.i, e.j) = 1.0;
  HoldoutView view;
  for (Index i = 0; i < inst.full.rows(); ++i)
    for (Index j = 0; j < inst.full.cols(); ++j)
      if (observed(i, j) == 0.0) {
        view.cells.emplace_back(i, j);
        view.truth.push_back(inst.full(i, j));
      }
  return view;
}

double validation_rmse(const Matrix& pred, const SparseObservations& val) {
  std::vector<double> t, p;
  t.reserve(val.entries.size());
  for (const auto& e : val.entries) {
    t.push_back(e.v);
    p.push_back(pred(e.i, e.j));
  }
  return rmse(t, p);
}

SynthMethodResult score_method(const std::string& name, const Matrix& pred,
                               const HoldoutView& holdout, const SiBiases& truth_biases,
                               double est_global, const Vector& est_user,
                               const Vector& est_item) {
  SynthMethodResult out;
  out.method = name;
  std::vector<double> p;
  p.reserve(holdout.cells.size());
  for (const auto& [i, j] : holdout.cells) p.push_back(pred(i, j));
  out.rmse = rmse(holdout.truth, p);
  out.spc = spearman(holdout.truth, p);
  const BiasDeviation dev = bias_deviation(truth_biases.global, truth_biases.user,
                                           truth_biases.item, est_global, est_user,
                                           est_item);
  out.mbd = dev.mbd;
  out.ubd = dev.ubd;
  out.ibd = dev.ibd;
  return out;
}

}  // namespace

std::vector<SynthMethodResult> run_synth_bench_cell(const SynthBenchConfig& config) {
  const SyntheticInstance inst =
      gen_synthetic(config.alpha, config.gamma, config.p_obs, config.m, config.n,
                    config.c, config.seed);
  const SplitResult parts = split(inst.observed, 0.85, 0.15, 0.0, config.seed ^ 0x5eedULL);
  const SparseObservations& train = parts.train;
  const SparseObservations& val = parts.validation;
  const HoldoutView holdout = unobserved_entries(inst);
  const SiBiases truth_biases = matrix_biases(inst.full);

  std::vector<SynthMethodResult> rows;

  // BOMIC: tied bias components plus a free residual, lambda_11 = 0.
  {
    const BasisFamily family = BasisFamily::bomic(config.m, config.n);
    HyperParams fixed = HyperParams::all_infinite(2, 2);
    fixed.lam(0, 0) = 0.0;
    std::vector<GridAxis> axes;
    axes.push_back({{{0, 1}, {1, 0}},
                    default_grid(train, family, {{0, 1}, {1, 0}}, config.bias_grid)});
    axes.push_back({{{1, 1}}, default_grid(train, family, {{1, 1}}, config.residual_grid)});
    const auto path = fit_path(train, family, fixed, axes, config.solver);

    double best = kInf;
    const PathEntry* chosen = nullptr;
    std::vector<Matrix> preds;
    preds.reserve(path.size());
    for (const auto& entry : path) {
      preds.push_back(assemble(entry.components, family));
      const double score = validation_rmse(preds.back(), val);
      if (score < best) {
        best = score;
        chosen = &path[preds.size() - 1];
      }
    }
    const Matrix& pred = preds[chosen - path.data()];
    FamilyDescriptor desc;
    desc.kind = FamilyKind::kBomic;
    desc.m = config.m;
    desc.n = config.n;
    const FittedModel model(desc, chosen->components, chosen->params,
                            FitMeta{config.seed, chosen->trace.iterations,
                                    chosen->trace.final_objective, "dense"});
    const auto biases = model.extract_biases();
    rows.push_back(score_method("bomic", pred, holdout, truth_biases, biases.global,
                                biases.user, biases.item));
  }

  // Biased SoftImpute: closed-form biases, then a SoftImpute path on the
  // residuals, selected on the validation split of the full prediction.
  {
    const BasisFamily identity = BasisFamily::softimpute(config.m, config.n);
    const BiasedSoftImpute base = biased_softimpute(train, 1.0, {1e-5, 1, false});
    SparseObservations residual(config.m, config.n);
    for (const auto& e : train.entries)
      residual.add(e.i, e.j, e.v - base.global_bias - base.user_bias[e.i] -
                                  base.item_bias[e.j]);
    const auto grid = default_grid(residual, identity, {{0, 0}}, config.baseline_grid);
    std::vector<GridAxis> axes{{{{0, 0}}, grid}};
    const auto path =
        fit_path(residual, identity, HyperParams::all_infinite(1, 1), axes, config.solver);

    double best = kInf;
    Matrix best_pred;
    for (const auto& entry : path) {
      Matrix pred = entry.components.empty(0, 0)
                        ? Matrix::Zero(config.m, config.n)
                        : entry.components.at(0, 0);
      pred.colwise() += base.user_bias;
      pred.rowwise() += base.item_bias.transpose();
      pred.array() += base.global_bias;
      const double score = validation_rmse(pred, val);
      if (score < best) {
        best = score;
        best_pred = std::move(pred);
      }
    }
    rows.push_back(score_method("bsi", best_pred, holdout, truth_biases,
                                base.global_bias, base.user_bias, base.item_bias));
  }

  // Plain SoftImpute with post-hoc bias estimates.
  {
    const BasisFamily identity = BasisFamily::softimpute(config.m, config.n);
    const auto grid = default_grid(train, identity, {{0, 0}}, config.baseline_grid);
    std::vector<GridAxis> axes{{{{0, 0}}, grid}};
    const auto path =
        fit_path(train, identity, HyperParams::all_infinite(1, 1), axes, config.solver);
    double best = kInf;
    Matrix best_pred;
    for (const auto& entry : path) {
      Matrix pred = entry.components.empty(0, 0) ? Matrix::Zero(config.m, config.n)
                                                 : entry.components.at(0, 0);
      const double score = validation_rmse(pred, val);
      if (score < best) {
        best = score;
        best_pred = std::move(pred);
      }
    }
    const SiBiases si = si_bias_postprocess(best_pred);
    rows.push_back(score_method("si", best_pred, holdout, truth_biases, si.global,
                                si.user, si.item));
  }
  return rows;
}

namespace {

// Once-and-for-all hyperparameter calibration on a fixed mid-range instance
// observed at the configured density, by validation selection over a small
// two-axis grid.
std::pair<double, double> calibrate_bound_lambdas(const BoundSweepConfig& config) {
  const int a = 4, r = 4;
  const double C = 1.0;
  const Index m = 144;
  const BoundInstance inst = gen_bound_matrix(a, r, C, m, config.seed ^ 0xca11b8ULL);
  Rng rng(config.seed ^ 0xca11b9ULL);
  SparseObservations obs(m, m);
  std::vector<Index> cells(m * m);
  for (Index t = 0; t < m * m; ++t) cells[t] = t;
  rng.shuffle(cells);
  const auto count =
      static_cast<Index>(config.calibration_density * static_cast<double>(m) * m);
  for (Index t = 0; t < count; ++t)
    obs.add(cells[t] / m, cells[t] % m, inst.full(cells[t] / m, cells[t] % m));

  const SplitResult parts = split(obs, 0.8, 0.2, 0.0, config.seed ^ 0xca11baULL);
  const BasisFamily family = BasisFamily::omicplus(inst.users, inst.items);
  HyperParams fixed = HyperParams::all_infinite(2, 2);
  std::vector<GridAxis> axes;
  axes.push_back({{{0, 0}}, default_grid(parts.train, family, {{0, 0}}, 4)});
  axes.push_back({{{1, 1}}, default_grid(parts.train, family, {{1, 1}}, 5)});
  const auto path = fit_path(parts.train, family, fixed, axes, config.solver);
  double best = kInf;
  std::pair<double, double> chosen{0.0, 0.0};
  for (const auto& entry : path) {
    const Matrix pred = assemble(entry.components, family);
    const double score = validation_rmse(pred, parts.validation);
    if (score < best) {
      best = score;
      chosen = {entry.params(0, 0), entry.params(1, 1)};
    }
  }
  return chosen;
}

}  // namespace

BoundSweepResult run_bound_sweep(const BoundSweepConfig& config) {
  BoundSweepResult out;
  const auto [lambda_comm, lambda_residual] = calibrate_bound_lambdas(config);
  out.lambda_comm = lambda_comm;
  out.lambda_residual = lambda_residual;

  Rng rng(config.seed);
  std::vector<double> measured, bounds;
  for (int t = 0; t < config.num_configs; ++t) {
    BoundConfigResult row;
    row.a = 2 + static_cast<int>(rng.uniform_index(7));  // {2..8}
    row.r = 2 + static_cast<int>(rng.uniform_index(7));
    row.C = rng.uniform(0.5, 2.0);
    const auto m_raw = static_cast<Index>(
        config.m_min + rng.uniform_index(config.m_max - config.m_min + 1));
    row.m = std::max<Index>(row.a, (m_raw / row.a) * row.a);  // divisible by a

    const BoundInstance inst =
        gen_bound_matrix(row.a, row.r, row.C, row.m, config.seed + 1000 + t);
    const BasisFamily family = BasisFamily::omicplus(inst.users, inst.items);
    HyperParams params = HyperParams::all_infinite(2, 2);
    params.lam(0, 0) = lambda_comm;
    params.lam(1, 1) = lambda_residual;

    SampleComplexityOptions sweep;
    sweep.epsilon = config.epsilon;
    sweep.initial_count = std::max<Index>(16, row.m);
    sweep.mode = config.mode;
    sweep.ordering_seed = config.seed + 2000 + t;
    const SampleComplexityResult result =
        empirical_sample_complexity(inst.full, family, params, config.solver, sweep);

    Matrix r_map(2, 2), c_map(2, 2);
    r_map << row.a, 0.0, 0.0, row.r;
    c_map << 1.0, 0.0, 0.0, row.C;
    row.bound = bound_value(row.a, row.a, row.m, row.m, r_map, c_map);
    row.reached = result.n_epsilon.has_value();
    row.n_epsilon = result.n_epsilon.value_or(0);
    if (row.reached) {
      measured.push_back(static_cast<double>(row.n_epsilon));
      bounds.push_back(row.bound);
    }
    out.configs.push_back(row);
  }
  out.spearman_value = measured.size() >= 2 ? spearman(measured, bounds) : 0.0;
  return out;
}

}  // namespace omic
