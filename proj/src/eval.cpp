#include "omic/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace omic {

double rmse(const std::vector<double>& truth, const std::vector<double>& pred) {
  require(truth.size() == pred.size(), "rmse: length mismatch");
  require(!truth.empty(), "rmse: empty test set");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - pred[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[a] < v[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double mean_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "spearman: length mismatch");
  require(x.size() >= 2, "spearman: need at least two points");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

BiasDeviation bias_deviation(double truth_global, const Vector& truth_user,
                             const Vector& truth_item, double est_global,
                             const Vector& est_user, const Vector& est_item) {
  require(truth_user.size() == est_user.size() && truth_item.size() == est_item.size(),
          "bias_deviation: dimension mismatch");
  BiasDeviation out;
  out.mbd = std::abs(truth_global - est_global);
  out.ubd = (truth_user - est_user).norm();
  out.ibd = (truth_item - est_item).norm();
  return out;
}

SiBiases si_bias_postprocess(const Matrix& r_hat) {
  require(r_hat.size() > 0, "si_bias_postprocess: empty matrix");
  SiBiases out;
  out.global = r_hat.mean();
  const Matrix residual = r_hat.array() - out.global;
  out.user = residual.rowwise().mean();
  out.item = residual.colwise().mean().transpose();
  return out;
}

double bound_value(Index a, Index b, Index m, Index n, const Matrix& r_map,
                   const Matrix& c_map, double ratio) {
  require(r_map.rows() == 2 && r_map.cols() == 2 && c_map.rows() == 2 && c_map.cols() == 2,
          "bound_value: rank and bound maps must be 2x2");
  require(a >= 1 && b >= 1 && m >= 2 && n >= 2, "bound_value: bad dimensions");
  require(ratio >= 1.0, "bound_value: community ratio must be >= 1");
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) {
      require(r_map(k, l) >= 0.0, "bound_value: negative rank");
      require(c_map(k, l) >= 0.0, "bound_value: negative bound");
    }
  if (a > b) std::swap(a, b);
  if (n > m) std::swap(m, n);

  auto sq = [](double v) { return v * v; };
  const double la = std::log(static_cast<double>(b));
  const double lm = std::log(static_cast<double>(m));
  const double ln = std::log(static_cast<double>(n));
  double total = 0.0;
  total += sq(ratio) * sq(c_map(0, 0)) * static_cast<double>(b) * r_map(0, 0) * la;
  total += ratio * sq(c_map(0, 1)) * static_cast<double>(n) * r_map(0, 1) * ln;
  total += ratio * sq(c_map(1, 0)) * static_cast<double>(m) * r_map(1, 0) * lm;
  total += sq(c_map(1, 1)) * static_cast<double>(m) * r_map(1, 1) * lm;
  return total;
}

SampleComplexityResult empirical_sample_complexity(
    const Matrix& truth, const BasisFamily& family, const HyperParams& params,
    const SolveOptions& solver_opts, const SampleComplexityOptions& opts) {
  require(truth.rows() == family.rows() && truth.cols() == family.cols(),
          "empirical_sample_complexity: dimension mismatch");
  require(opts.growth > 1.0 && opts.initial_count >= 1,
          "empirical_sample_complexity: bad sweep schedule");

  const Index m = truth.rows(), n = truth.cols();
  const auto ordering = entry_ordering(m, n, opts.mode, opts.ordering_seed);
  const auto capacity = static_cast<Index>(ordering.size());

  SampleComplexityResult out;
  DenseComponents warm;
  bool have_warm = false;

  Index count = std::min(opts.initial_count, capacity);
  while (true) {
    SparseObservations obs(m, n);
    for (Index t = 0; t < count; ++t)
      obs.add(ordering[t].first, ordering[t].second, truth(ordering[t].first, ordering[t].second));

    FitResult fit_result =
        fit(obs, family, params, solver_opts, have_warm ? &warm : nullptr);
    warm = fit_result.components;
    have_warm = true;

    const Matrix pred = assemble(warm, family);
    double sum = 0.0;
    Index held = 0;
    for (Index t = count; t < capacity; ++t) {
      const auto [i, j] = ordering[t];
      const double d = truth(i, j) - pred(i, j);
      sum += d * d;
      ++held;
    }
    // With everything observed there is nothing held out; fall back to the
    // training entries so the threshold test stays meaningful.
    double value;
    if (held > 0) {
      value = std::sqrt(sum / static_cast<double>(held));
    } else {
      std::vector<double> t_vals, p_vals;
      for (Index t = 0; t < capacity; ++t) {
        const auto [i, j] = ordering[t];
        t_vals.push_back(truth(i, j));
        p_vals.push_back(pred(i, j));
      }
      value = rmse(t_vals, p_vals);
    }
    out.counts.push_back(count);
    out.rmses.push_back(value);
    if (value <= opts.epsilon) {
      out.n_epsilon = count;
      return out;
    }
    if (count >= capacity) return out;  // sentinel: never reached epsilon
    count = std::min<Index>(
        capacity, std::max<Index>(count + 1, static_cast<Index>(std::ceil(
                                                 static_cast<double>(count) * opts.growth))));
  }
}

}  // namespace omic
