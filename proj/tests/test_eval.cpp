#include <doctest.h>

#include <algorithm>
#include <omic/eval.hpp>

#include "test_util.hpp"

using namespace omic;
using namespace omic::testutil;

TEST_SUITE_BEGIN("eval");

TEST_CASE("rmse basics") {
  CHECK(rmse({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == doctest::Approx(0.0));
  CHECK(rmse({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(5.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(rmse({}, {}), InvalidInput);
  CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), InvalidInput);
}

TEST_CASE("rmse symmetry and triangle-style bound") {
  Rng rng(111);
  std::vector<double> t(50), p(50), q(50);
  for (int i = 0; i < 50; ++i) {
    t[i] = rng.gaussian();
    p[i] = rng.gaussian();
    q[i] = rng.gaussian();
  }
  CHECK(rmse(t, p) == doctest::Approx(rmse(p, t)));
  CHECK(rmse(t, p) <= rmse(t, q) + rmse(q, p) + 1e-12);
}

TEST_CASE("spearman on exact and reversed orders") {
  const std::vector<double> x = {0.1, 0.4, 0.9, 2.0, 5.0};
  std::vector<double> rev = x;
  std::reverse(rev.begin(), rev.end());
  CHECK(spearman(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(x, rev) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("spearman handles ties like the brute-force rank oracle") {
  const std::vector<double> x = {1.0, 2.0, 2.0, 3.0, 3.0, 3.0};
  const std::vector<double> y = {0.3, 0.1, 0.5, 0.9, 0.2, 0.9};
  // Oracle: mean ranks computed naively, then Pearson.
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0.0, equal = 0.0;
      for (double other : v) {
        less += other < v[i] ? 1.0 : 0.0;
        equal += other == v[i] ? 1.0 : 0.0;
      }
      r[i] = less + 0.5 * (equal + 1.0);
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= rx.size();
  my /= ry.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  CHECK(spearman(x, y) == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));
}

TEST_CASE("spearman is invariant under monotone transforms") {
  Rng rng(112);
  std::vector<double> x(40), y(40), x_warped(40);
  for (int i = 0; i < 40; ++i) {
    x[i] = rng.gaussian();
    y[i] = rng.gaussian();
    x_warped[i] = std::exp(2.0 * x[i]) + 5.0;
  }
  CHECK(spearman(x, y) == doctest::Approx(spearman(x_warped, y)).epsilon(1e-12));
}

TEST_CASE("spearman degenerate input yields NaN") {
  CHECK(std::isnan(spearman({1.0, 1.0, 1.0}, {0.5, 0.2, 0.9})));
  CHECK_THROWS_AS(spearman({1.0}, {2.0}), InvalidInput);
}

TEST_CASE("bias deviation identities") {
  Rng rng(113);
  const Vector u = random_matrix(rng, 6, 1).col(0);
  const Vector b = random_matrix(rng, 4, 1).col(0);
  const BiasDeviation exact = bias_deviation(0.5, u, b, 0.5, u, b);
  CHECK(exact.mbd == doctest::Approx(0.0));
  CHECK(exact.ubd == doctest::Approx(0.0));
  CHECK(exact.ibd == doctest::Approx(0.0));

  const double delta = 0.7;
  const BiasDeviation off =
      bias_deviation(0.0, u, b, 0.0, u.array() + delta, b);
  CHECK(off.ubd == doctest::Approx(delta * std::sqrt(6.0)).epsilon(1e-12));
}

TEST_CASE("si bias postprocess on a constant matrix") {
  const SiBiases biases = si_bias_postprocess(Matrix::Constant(5, 7, 2.5));
  CHECK(biases.global == doctest::Approx(2.5));
  CHECK(biases.user.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(biases.item.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("si bias postprocess isolates user biases") {
  Rng rng(114);
  Vector u = random_matrix(rng, 6, 1).col(0);
  u.array() -= u.mean();
  const Matrix r = u * Matrix::Ones(1, 9);
  const SiBiases biases = si_bias_postprocess(r);
  CHECK(std::abs(biases.global) <= 1e-12);
  CHECK((biases.user - u).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(biases.item.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("si bias postprocess matches the per-definition oracle") {
  Rng rng(115);
  const Matrix r = random_matrix(rng, 8, 11);
  const SiBiases biases = si_bias_postprocess(r);
  double global = 0.0;
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 11; ++j) global += r(i, j);
  global /= 88.0;
  CHECK(biases.global == doctest::Approx(global).epsilon(1e-12));
  for (Index i = 0; i < 8; ++i) {
    double s = 0.0;
    for (Index j = 0; j < 11; ++j) s += r(i, j) - global;
    CHECK(biases.user[i] == doctest::Approx(s / 11.0).epsilon(1e-12));
  }
  for (Index j = 0; j < 11; ++j) {
    double s = 0.0;
    for (Index i = 0; i < 8; ++i) s += r(i, j) - global;
    CHECK(biases.item[j] == doctest::Approx(s / 8.0).epsilon(1e-12));
  }
}

TEST_CASE("bound value reductions") {
  const Matrix zero = Matrix::Zero(2, 2);
  CHECK(bound_value(3, 3, 100, 100, Matrix::Ones(2, 2), zero) == doctest::Approx(0.0));

  Matrix c = Matrix::Zero(2, 2);
  c(1, 1) = 2.0;
  Matrix r = Matrix::Zero(2, 2);
  r(1, 1) = 5.0;
  CHECK(bound_value(4, 4, 200, 200, r, c) ==
        doctest::Approx(4.0 * 200.0 * 5.0 * std::log(200.0)).epsilon(1e-12));

  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(bound_value(4, 4, 200, 200, bad, c), InvalidInput);
}

TEST_CASE("sample complexity: infinite epsilon stops at the first sweep point") {
  Rng rng(116);
  const Matrix truth = random_low_rank(rng, 20, 20, 2);
  const BasisFamily family = BasisFamily::softimpute(20, 20);
  SampleComplexityOptions opts;
  opts.epsilon = kInf;
  opts.initial_count = 16;
  const SampleComplexityResult result =
      empirical_sample_complexity(truth, family, HyperParams(1, 1, 0.1), {}, opts);
  REQUIRE(result.n_epsilon.has_value());
  CHECK(*result.n_epsilon == 16);
}

TEST_CASE("sample complexity: constant matrices are learned from a few entries") {
  const Matrix truth = Matrix::Constant(100, 100, 1.0);
  const BasisFamily family = BasisFamily::bomic(100, 100);
  Matrix lam = Matrix::Constant(2, 2, 0.2);
  lam(0, 0) = 0.0;
  SampleComplexityOptions opts;
  opts.epsilon = 0.1;
  opts.initial_count = 8;
  SolveOptions solver;
  solver.tol = 1e-6;
  solver.max_iters = 1500;  // the unregularized mean cell contracts slowly
  const SampleComplexityResult result =
      empirical_sample_complexity(truth, family, HyperParams{lam}, solver, opts);
  REQUIRE(result.n_epsilon.has_value());
  CHECK(*result.n_epsilon <= 48);
}

TEST_CASE("sample complexity is nonincreasing in epsilon") {
  Rng rng(117);
  const Matrix truth = random_low_rank(rng, 24, 24, 2);
  const BasisFamily family = BasisFamily::softimpute(24, 24);
  const HyperParams params(1, 1, 0.05);
  SolveOptions solver;
  solver.tol = 1e-6;
  SampleComplexityOptions loose, tight;
  loose.epsilon = 0.5;
  tight.epsilon = 0.05;
  const auto n_loose = empirical_sample_complexity(truth, family, params, solver, loose);
  const auto n_tight = empirical_sample_complexity(truth, family, params, solver, tight);
  if (n_loose.n_epsilon && n_tight.n_epsilon)
    CHECK(*n_loose.n_epsilon <= *n_tight.n_epsilon);
}

TEST_SUITE_END();
