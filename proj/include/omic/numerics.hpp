#pragma once

#include "omic/sparse.hpp"
#include "omic/types.hpp"

namespace omic {

double frobenius_norm(const Matrix& a);

/// Sum of singular values.
double nuclear_norm(const Matrix& a);

/// Top-r singular triplets of a dense matrix. Factors follow a deterministic
/// sign convention: the largest-magnitude entry of each left singular vector
/// is made positive (first such entry on ties).
LowRankFactor truncated_svd(const Matrix& a, Index r);

/// Thin SVD of the full matrix with the same sign convention.
LowRankFactor full_svd(const Matrix& a);

/// Flip factor signs in place so each column of U has its largest-magnitude
/// entry positive.
void canonicalize_signs(Matrix& u, Matrix& v);

/// Thin SVD without the sign convention. Uses the divide-and-conquer kernel
/// and falls back to the slower unconditionally stable one when the former
/// returns non-finite values (which happens on some degenerate spectra).
void thin_svd_raw(const Matrix& a, Matrix& u, Vector& s, Matrix& v);

/// Z * W without materializing Z. W is n x r, result m x r.
Matrix splr_mul_right(const SparsePlusLowRank& z, const Matrix& w);

/// Z^T * W without materializing Z. W is m x r, result n x r.
Matrix splr_mul_left(const SparsePlusLowRank& z, const Matrix& w);

}  // namespace omic
