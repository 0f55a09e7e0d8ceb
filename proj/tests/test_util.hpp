#pragma once

#include <omic/bases.hpp>
#include <omic/model.hpp>
#include <omic/prox.hpp>
#include <omic/rng.hpp>
#include <omic/solver.hpp>

namespace omic::testutil {

inline Matrix random_matrix(Rng& rng, Index m, Index n, double scale = 1.0) {
  Matrix a(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) a(i, j) = scale * rng.gaussian();
  return a;
}

inline Matrix random_low_rank(Rng& rng, Index m, Index n, Index rank,
                              double scale = 1.0) {
  return random_matrix(rng, m, rank, scale) * random_matrix(rng, rank, n, 1.0) /
         std::sqrt(static_cast<double>(rank));
}

/// Observe a uniform sample of entries of a full matrix.
inline SparseObservations sample_entries(Rng& rng, const Matrix& full,
                                         double fraction) {
  std::vector<Index> cells(full.size());
  for (Index t = 0; t < full.size(); ++t) cells[t] = t;
  rng.shuffle(cells);
  const auto count = static_cast<Index>(
      std::llround(fraction * static_cast<double>(full.size())));
  SparseObservations obs(full.rows(), full.cols());
  for (Index t = 0; t < count; ++t) {
    const Index i = cells[t] % full.rows();
    const Index j = cells[t] / full.rows();
    obs.add(i, j, full(i, j));
  }
  return obs;
}

inline CommunityAssignment random_assignment(Rng& rng, Index n, int num_communities) {
  std::vector<int> a(n);
  // Guarantee nonempty communities by seeding one member each.
  for (int c = 0; c < num_communities; ++c) a[c] = c;
  for (Index i = num_communities; i < n; ++i)
    a[i] = static_cast<int>(rng.uniform_index(num_communities));
  std::vector<Index> perm(n);
  for (Index i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<int> shuffled(n);
  for (Index i = 0; i < n; ++i) shuffled[i] = a[perm[i]];
  return CommunityAssignment(n, std::move(shuffled));
}

/// A random family of one of the four construction kinds.
inline BasisFamily random_family(Rng& rng, Index m, Index n) {
  switch (rng.uniform_index(4)) {
    case 0:
      return BasisFamily::softimpute(m, n);
    case 1:
      return BasisFamily::bomic(m, n);
    case 2: {
      const int a = 1 + static_cast<int>(rng.uniform_index(std::min<Index>(m - 1, 6)));
      const int b = 1 + static_cast<int>(rng.uniform_index(std::min<Index>(n - 1, 6)));
      return BasisFamily::omicplus(random_assignment(rng, m, a),
                                   random_assignment(rng, n, b));
    }
    default: {
      const int a = 1 + static_cast<int>(rng.uniform_index(std::min<Index>(m - 1, 6)));
      const int b = 1 + static_cast<int>(rng.uniform_index(std::min<Index>(n - 1, 6)));
      return BasisFamily::bomicplus(random_assignment(rng, m, a),
                                    random_assignment(rng, n, b));
    }
  }
}

inline HyperParams random_params(Rng& rng, const BasisFamily& family,
                                 double lo = 0.05, double hi = 1.0) {
  Matrix lam(family.K(), family.L());
  for (int k = 0; k < family.K(); ++k)
    for (int l = 0; l < family.L(); ++l) lam(k, l) = rng.uniform(lo, hi);
  return HyperParams(std::move(lam));
}

/// Independent projector oracle: an explicit orthonormal basis of the span of
/// `seed_cols` via Householder QR, returned as the projector matrix Q Q^T.
inline Matrix qr_projector_oracle(const Matrix& seed_cols) {
  Eigen::HouseholderQR<Matrix> qr(seed_cols);
  Matrix q = qr.householderQ() * Matrix::Identity(seed_cols.rows(), seed_cols.cols());
  // Drop dependent directions by rank-revealing re-check.
  Eigen::ColPivHouseholderQR<Matrix> rr(seed_cols);
  const Index rank = rr.rank();
  Matrix qfull = rr.householderQ() * Matrix::Identity(seed_cols.rows(), rank);
  return qfull * qfull.transpose();
}

/// Eigen-solver oracle for the nuclear norm: trace of sqrt(A^T A).
inline double nuclear_norm_oracle(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.transpose() * a);
  double sum = 0.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
    sum += std::sqrt(std::max(0.0, es.eigenvalues()[i]));
  return sum;
}

/// Objective of the fully-known proximal problem solved by generalized SVT:
/// (1/2) ||Ztilde - Z||_F^2 + sum_kl lambda_kl ||X^(k)T Ztilde Y^(l)||_*.
inline double gsvt_objective_oracle(const Matrix& candidate, const Matrix& z,
                                    const BasisFamily& family,
                                    const HyperParams& params) {
  double value = 0.5 * (candidate - z).squaredNorm();
  const DenseComponents cores = decompose(candidate, family);
  for (int k = 0; k < family.K(); ++k)
    for (int l = 0; l < family.L(); ++l) {
      if (cores.empty(k, l)) continue;
      if (!params.finite(k, l)) {
        value += cores.at(k, l).norm() > 1e-9 ? 1e18 : 0.0;
        continue;
      }
      value += params(k, l) * nuclear_norm(cores.at(k, l));
    }
  return value;
}

}  // namespace omic::testutil
