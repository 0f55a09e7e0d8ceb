#include "omic/solver.hpp"

#include <algorithm>
#include <map>

namespace omic {

namespace {

void check_shapes(const SparseObservations& obs, const BasisFamily& family) {
  require(obs.rows == family.rows() && obs.cols == family.cols(),
          "observations and basis family disagree on dimensions");
}

double data_loss_dense(const UniqueObservations& unique, const Matrix& z) {
  double loss = unique.constant_loss;
  for (const auto& rec : unique.records) {
    const double r = rec.mean - z(rec.i, rec.j);
    loss += 0.5 * rec.weight * r * r;
  }
  return loss;
}

}  // namespace

double objective(const SparseObservations& obs, const DenseComponents& components,
                 const BasisFamily& family, const HyperParams& params) {
  check_shapes(obs, family);
  require(components.K == family.K() && components.L == family.L(),
          "objective: component shape mismatch");
  double reg = 0.0;
  for (int k = 0; k < family.K(); ++k)
    for (int l = 0; l < family.L(); ++l) {
      if (components.empty(k, l)) continue;
      if (!params.finite(k, l)) {
        if (components.at(k, l).norm() > 0.0)
          throw ContractViolation(
              "component (" + std::to_string(k) + "," + std::to_string(l) +
              ") has lambda = inf but a nonzero core");
        continue;
      }
      if (params(k, l) > 0.0) reg += params(k, l) * nuclear_norm(components.at(k, l));
    }
  const Matrix z = assemble(components, family);
  return reg + data_loss_dense(UniqueObservations::from(obs), z);
}

FitResult fit(const SparseObservations& obs, const BasisFamily& family,
              const HyperParams& params, const SolveOptions& opts,
              const DenseComponents* warm_start) {
  check_shapes(obs, family);
  require(params.K() == family.K() && params.L() == family.L(),
          "fit: hyperparameter shape mismatch");
  require(opts.tol > 0.0 && opts.max_iters >= 1, "fit: bad solve options");
  bool any_finite = false;
  for (int k = 0; k < params.K(); ++k)
    for (int l = 0; l < params.L(); ++l) any_finite |= params.finite(k, l);
  require(any_finite, "fit: at least one component must have finite lambda");

  const UniqueObservations unique = UniqueObservations::from(obs);
  // Duplicate observations make the data term a weighted square loss. The
  // imputation step then becomes a proximal gradient step of length 1/c with
  // thresholds Lambda/c, where c is the largest multiplicity; with c = 1 this
  // is the plain impute-and-threshold iteration.
  const double c = std::max(1.0, unique.max_weight);
  const HyperParams step_params = params.scaled(1.0 / c);

  Matrix z;
  DenseComponents components(family.K(), family.L());
  if (warm_start) {
    components = *warm_start;
    z = assemble(components, family);
  } else {
    z = Matrix::Zero(obs.rows, obs.cols);
  }

  FitResult out;
  SolveTrace& trace = out.trace;
  double prev_objective = std::numeric_limits<double>::infinity();

  for (int it = 0; it < opts.max_iters; ++it) {
    Matrix target = z;
    for (const auto& rec : unique.records) {
      const double w = rec.weight / c;
      target(rec.i, rec.j) -= w * (target(rec.i, rec.j) - rec.mean);
    }

    GsvtResult step = generalized_svt(target, family, step_params);

    const double change = (step.assembled - z).norm();
    const double denom = std::max(1.0, z.norm());
    z = std::move(step.assembled);
    components = std::move(step.components);

    double reg = 0.0;
    for (int k = 0; k < family.K(); ++k)
      for (int l = 0; l < family.L(); ++l)
        if (params.finite(k, l) && params(k, l) > 0.0)
          reg += params(k, l) * step.nuclear(k, l);
    const double obj = reg + data_loss_dense(unique, z);

    trace.iterations = it + 1;
    if (obj > prev_objective)
      trace.monotone_violation = std::max(trace.monotone_violation, obj - prev_objective);
    prev_objective = obj;
    trace.final_objective = obj;
    if (opts.record_trace) trace.points.push_back({obj, change});

    if (change / denom < opts.tol) {
      trace.converged = true;
      break;
    }
  }

  out.components = std::move(components);
  return out;
}

double component_sigma_max(const SparseObservations& obs, const BasisFamily& family,
                           int k, int l) {
  check_shapes(obs, family);
  const Matrix target = obs.dense();
  const Matrix zk = family.row_side().is_identity()
                        ? target
                        : Matrix(family.row_side().materialized(k).transpose() * target);
  const Matrix core = family.col_side().is_identity()
                          ? zk
                          : Matrix(zk * family.col_side().materialized(l));
  if (core.size() == 0) return 0.0;
  if (core.rows() == 1 || core.cols() == 1) return core.norm();
  Matrix u, v;
  Vector s;
  thin_svd_raw(core, u, s, v);
  return s[0];
}

std::vector<double> default_grid(const SparseObservations& obs,
                                 const BasisFamily& family,
                                 const std::vector<std::pair<int, int>>& cells,
                                 int count) {
  require(!cells.empty() && count >= 1, "default_grid: bad arguments");
  double sigma = 0.0;
  for (const auto& [k, l] : cells)
    sigma = std::max(sigma, component_sigma_max(obs, family, k, l));
  if (sigma <= 0.0) sigma = 1.0;
  std::vector<double> values(count);
  const double hi = sigma / 2.0, lo = sigma / 100.0;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    values[i] = hi * std::pow(lo / hi, t);
  }
  return values;
}

std::vector<PathEntry> fit_path(const SparseObservations& obs,
                                const BasisFamily& family, const HyperParams& fixed,
                                std::vector<GridAxis> axes,
                                const SolveOptions& opts) {
  check_shapes(obs, family);
  const int K = family.K(), L = family.L();
  require(fixed.K() == K && fixed.L() == L, "fit_path: fixed shape mismatch");

  std::vector<int> owner(K * L, -1);  // axis id per cell, -1 = fixed
  for (std::size_t a = 0; a < axes.size(); ++a) {
    require(!axes[a].values.empty(), "fit_path: empty grid axis");
    std::sort(axes[a].values.begin(), axes[a].values.end(), std::greater<>());
    for (auto [k, l] : axes[a].cells) {
      require(k >= 0 && k < K && l >= 0 && l < L, "fit_path: cell out of range");
      require(owner[k * L + l] == -1, "fit_path: cell appears in two axes");
      owner[k * L + l] = static_cast<int>(a);
    }
  }

  // Phase 1: every component trained alone, warm-started along its values.
  // Cells with a finite fixed lambda get a single-value pass of the same kind.
  std::map<std::pair<int, int>, std::map<double, DenseComponents>> singles;
  auto solve_singles = [&](int k, int l, const std::vector<double>& values) {
    DenseComponents warm(K, L);
    const DenseComponents* prev = nullptr;
    for (double v : values) {
      FitResult r = fit(obs, family, fixed.pinned(k, l, v), opts, prev);
      warm = std::move(r.components);
      prev = &warm;
      singles[{k, l}][v] = warm;
    }
  };
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      if (family.row_side().block(k).width == 0 || family.col_side().block(l).width == 0)
        continue;
      const int a = owner[k * L + l];
      if (a >= 0)
        solve_singles(k, l, axes[a].values);
      else if (fixed.finite(k, l))
        solve_singles(k, l, {fixed(k, l)});
    }

  // Phase 2: full product grid over the axes, initialized with the summed
  // single-component solutions.
  std::vector<PathEntry> out;
  std::vector<int> idx(axes.size(), 0);
  while (true) {
    HyperParams params = fixed;
    for (std::size_t a = 0; a < axes.size(); ++a)
      for (auto [k, l] : axes[a].cells) params.lam(k, l) = axes[a].values[idx[a]];

    DenseComponents init(K, L);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) {
        if (!params.finite(k, l)) continue;
        auto it = singles.find({k, l});
        if (it == singles.end()) continue;
        auto vit = it->second.find(params(k, l));
        if (vit != it->second.end() && !vit->second.empty(k, l))
          init.at(k, l) = vit->second.at(k, l);
      }

    PathEntry entry;
    entry.value_index = idx;
    FitResult r = fit(obs, family, params, opts, &init);
    entry.params = std::move(params);
    entry.components = std::move(r.components);
    entry.trace = std::move(r.trace);
    out.push_back(std::move(entry));

    if (axes.empty()) break;
    std::size_t a = axes.size();
    bool rolled_over = true;
    while (a > 0) {
      --a;
      if (++idx[a] < static_cast<int>(axes[a].values.size())) {
        rolled_over = false;
        break;
      }
      idx[a] = 0;
    }
    if (rolled_over) break;
  }
  return out;
}

FitResult softimpute(const SparseObservations& obs, double lambda,
                     const SolveOptions& opts) {
  const BasisFamily family = BasisFamily::softimpute(obs.rows, obs.cols);
  return fit(obs, family, HyperParams(1, 1, lambda), opts);
}

BiasedSoftImpute biased_softimpute(const SparseObservations& obs, double lambda,
                                   const SolveOptions& opts) {
  require(obs.nnz() > 0, "biased_softimpute: no observations");
  BiasedSoftImpute out;
  out.user_bias = Vector::Zero(obs.rows);
  out.item_bias = Vector::Zero(obs.cols);

  double sum = 0.0;
  for (const auto& e : obs.entries) sum += e.v;
  out.global_bias = sum / static_cast<double>(obs.nnz());

  Vector user_sum = Vector::Zero(obs.rows), item_sum = Vector::Zero(obs.cols);
  Vector user_cnt = Vector::Zero(obs.rows), item_cnt = Vector::Zero(obs.cols);
  for (const auto& e : obs.entries) {
    user_sum[e.i] += e.v - out.global_bias;
    user_cnt[e.i] += 1.0;
  }
  for (Index i = 0; i < obs.rows; ++i)
    out.user_bias[i] = user_cnt[i] > 0.0 ? user_sum[i] / user_cnt[i] : 0.0;

  for (const auto& e : obs.entries) {
    item_sum[e.j] += e.v - out.global_bias - out.user_bias[e.i];
    item_cnt[e.j] += 1.0;
  }
  for (Index j = 0; j < obs.cols; ++j)
    out.item_bias[j] = item_cnt[j] > 0.0 ? item_sum[j] / item_cnt[j] : 0.0;

  SparseObservations residual(obs.rows, obs.cols);
  for (const auto& e : obs.entries)
    residual.add(e.i, e.j, e.v - out.global_bias - out.user_bias[e.i] - out.item_bias[e.j]);

  out.residual_fit = softimpute(residual, lambda, opts);
  return out;
}

}  // namespace omic
