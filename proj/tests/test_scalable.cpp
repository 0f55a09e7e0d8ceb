#include <doctest.h>

#include <omic/eval.hpp>
#include <omic/scalable.hpp>

#include "test_util.hpp"

using namespace omic;
using namespace omic::testutil;

TEST_SUITE_BEGIN("scalable");

namespace {

SparsePlusLowRank dense_as_splr(const Matrix& z) {
  // Wrap a small dense matrix as sparse-plus-zero for oracle comparisons.
  std::vector<Eigen::Triplet<double>> trips;
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.cols(); ++j)
      if (z(i, j) != 0.0) trips.emplace_back(i, j, z(i, j));
  SpMatrix sp(z.rows(), z.cols());
  sp.setFromTriplets(trips.begin(), trips.end());
  return SparsePlusLowRank(std::move(sp), LowRankFactor::zero(z.rows(), z.cols()));
}

}  // namespace

TEST_CASE("svt_als reproduces a target inside one component subspace") {
  Rng rng(71);
  const Index m = 24, n = 20;
  const CommunityAssignment users = random_assignment(rng, m, 3);
  const CommunityAssignment items = random_assignment(rng, n, 3);
  const BasisFamily family = BasisFamily::bomicplus(users, items);

  // Rank-2 target living entirely in the residual x residual component.
  Matrix seed = random_low_rank(rng, m, n, 2);
  seed = family.row_side().project(
      2, family.col_side().project(2, seed.transpose()).transpose());

  HyperParams params = HyperParams::all_infinite(3, 3);
  params.lam(2, 2) = 0.0;
  AlsOptions opts;
  opts.max_rank = 6;
  opts.inner_tol = 1e-12;
  opts.inner_max_iters = 400;
  opts.seed = 5;
  const SvtAlsResult result = svt_als(dense_as_splr(seed), family, params, opts);
  const Matrix recovered = result.components.at(2, 2).dense();
  CHECK((recovered - seed).norm() <= 1e-6 * std::max(1.0, seed.norm()));
}

TEST_CASE("svt_als thresholds everything away for huge lambdas") {
  Rng rng(72);
  const Matrix z = random_matrix(rng, 15, 12);
  const BasisFamily family = BasisFamily::bomic(15, 12);
  const HyperParams params(2, 2, 1e6);
  AlsOptions opts;
  opts.max_rank = 4;
  const SvtAlsResult result = svt_als(dense_as_splr(z), family, params, opts);
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) CHECK(result.components.at(k, l).rank() == 0);
}

TEST_CASE("svt_als matches the dense generalized svt") {
  Rng rng(73);
  const Index m = 60, n = 50;
  const CommunityAssignment users = random_assignment(rng, m, 4);
  const CommunityAssignment items = random_assignment(rng, n, 5);
  const BasisFamily family = BasisFamily::bomicplus(users, items);
  const Matrix z = random_low_rank(rng, m, n, 5, 2.0) + random_matrix(rng, m, n, 0.05);

  // Thresholds below each component's top singular value, so every
  // component keeps some mass but stays within the rank budget.
  Matrix lam(3, 3);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      const Matrix proj = family.row_side().project(
          k, family.col_side().project(l, z.transpose()).transpose());
      lam(k, l) = std::max(0.3 * full_svd(proj).d[0], 1e-3);
    }
  const HyperParams params{lam};

  AlsOptions opts;
  opts.max_rank = 10;
  opts.inner_tol = 1e-11;
  opts.inner_max_iters = 800;
  opts.seed = 7;
  const SvtAlsResult als = svt_als(dense_as_splr(z), family, params, opts);
  const GsvtResult dense = generalized_svt(z, family, params);

  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      const Matrix als_component = als.components.at(k, l).dense();
      Matrix dense_component = Matrix::Zero(m, n);
      if (!dense.components.empty(k, l))
        dense_component = family.row_side().materialized(k) *
                          dense.components.at(k, l) *
                          family.col_side().materialized(l).transpose();
      CHECK((als_component - dense_component).norm() <=
            1e-6 * std::max(1.0, dense_component.norm()));
    }
}

TEST_CASE("svt_als clamps the rank to the block width with a warning") {
  Rng rng(74);
  const Index m = 12, n = 12;
  const CommunityAssignment comm = random_assignment(rng, m, 4);
  const BasisFamily family = BasisFamily::omicplus(comm, comm);
  HyperParams params = HyperParams::all_infinite(2, 2);
  params.lam(0, 0) = 0.01;
  AlsOptions opts;
  opts.max_rank = 50;  // wider than the 4-dim community block
  const SvtAlsResult result =
      svt_als(dense_as_splr(random_matrix(rng, m, n)), family, params, opts);
  CHECK(result.components.at(0, 0).rank() <= 4);
  bool saw_clamp = false;
  for (const auto& w : result.warnings) saw_clamp |= w.find("clamped") != std::string::npos;
  CHECK(saw_clamp);
}

TEST_CASE("factor orthonormality after als") {
  Rng rng(75);
  const Matrix z = random_low_rank(rng, 40, 30, 6);
  const BasisFamily family = BasisFamily::bomic(40, 30);
  const HyperParams params(2, 2, 0.05);
  AlsOptions opts;
  opts.max_rank = 8;
  opts.seed = 3;
  const SvtAlsResult result = svt_als(dense_as_splr(z), family, params, opts);
  for (const auto& f : result.components.factors) f.check_invariants(1e-8);
}

TEST_CASE("fit_scalable matches the dense solver on a small instance") {
  Rng rng(76);
  const Index m = 40, n = 32;
  const CommunityAssignment users = random_assignment(rng, m, 3);
  const CommunityAssignment items = random_assignment(rng, n, 3);
  const BasisFamily family = BasisFamily::bomicplus(users, items);
  const Matrix truth = random_low_rank(rng, m, n, 3, 1.5);
  const SparseObservations obs = sample_entries(rng, truth, 0.5);

  // The rank cap must not bind: lambda large enough that every component of
  // the optimum stays well below max_rank.
  Matrix lam = Matrix::Constant(3, 3, 0.35);
  lam(0, 0) = 0.0;
  const HyperParams params{lam};

  SolveOptions dense_opts;
  dense_opts.tol = 1e-8;
  dense_opts.max_iters = 5000;
  const FitResult dense = fit(obs, family, params, dense_opts);

  AlsOptions als;
  als.max_rank = 15;
  als.inner_tol = 1e-10;
  als.inner_max_iters = 400;
  als.seed = 11;
  SolveOptions outer = dense_opts;
  const ScalableFitResult scalable = fit_scalable(obs, family, params, als, outer);
  CHECK_FALSE(scalable.rank_cap_hit());

  CHECK(std::abs(scalable.trace.final_objective - dense.trace.final_objective) <=
        1e-4 * std::max(1.0, dense.trace.final_objective));
}

TEST_CASE("fit_scalable with no observations returns the zero model at once") {
  const BasisFamily family = BasisFamily::bomic(10, 10);
  const SparseObservations obs(10, 10);
  AlsOptions als;
  als.max_rank = 3;
  const ScalableFitResult result = fit_scalable(obs, family, HyperParams(2, 2, 0.1), als);
  CHECK(result.trace.iterations == 1);
  CHECK(result.trace.converged);
  CHECK(result.components.total_rank() == 0);
}

TEST_CASE("monotone outer loss within slack") {
  Rng rng(77);
  const Matrix truth = random_low_rank(rng, 50, 45, 4);
  const SparseObservations obs = sample_entries(rng, truth, 0.3);
  const BasisFamily family = BasisFamily::bomic(50, 45);
  Matrix lam = Matrix::Constant(2, 2, 0.05);
  lam(0, 0) = 0.0;
  AlsOptions als;
  als.max_rank = 10;
  als.inner_tol = 1e-8;
  als.seed = 2;
  SolveOptions outer;
  outer.record_trace = true;
  outer.tol = 1e-6;
  const ScalableFitResult result = fit_scalable(obs, family, HyperParams{lam}, als, outer);
  CHECK(result.trace.monotone_violation <= 1e-6);
}

TEST_CASE("rating-matrix-scale run stays in factored form") {
  // 6040 x 3706 with about 10^6 observed entries and r = 50: the largest
  // allocations are (m + n) x r_total factors; a dense m x n buffer would
  // trip the internal guard.
  Rng rng(78);
  const Index m = 6040, n = 3706;
  const Index count = 1000000;
  SparseObservations obs(m, n);
  std::vector<char> seen;  // avoid duplicate coordinates cheaply
  seen.assign(static_cast<std::size_t>(m) * n / 8 + 1, 0);
  Index added = 0;
  while (added < count) {
    const Index i = static_cast<Index>(rng.uniform_index(m));
    const Index j = static_cast<Index>(rng.uniform_index(n));
    const std::size_t bit = static_cast<std::size_t>(i) * n + j;
    if (seen[bit / 8] & (1 << (bit % 8))) continue;
    seen[bit / 8] |= static_cast<char>(1 << (bit % 8));
    obs.add(i, j, 3.0 + rng.gaussian());
    ++added;
  }
  const CommunityAssignment users = random_assignment(rng, m, 14);
  const CommunityAssignment items = random_assignment(rng, n, 18);
  const BasisFamily family = BasisFamily::bomicplus(users, items);
  Matrix lam = Matrix::Constant(3, 3, 20.0);
  lam(0, 0) = 0.0;
  AlsOptions als;
  als.max_rank = 50;
  als.inner_max_iters = 3;
  als.seed = 1;
  SolveOptions outer;
  outer.max_iters = 2;  // two sweeps are enough to exercise every code path
  const ScalableFitResult result = fit_scalable(obs, family, HyperParams{lam}, als, outer);
  CHECK(result.trace.iterations == 2);
  CHECK(result.components.total_rank() > 0);
}

TEST_SUITE_END();
