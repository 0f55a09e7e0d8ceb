#include "omic/scalable.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>

#include "omic/rng.hpp"

namespace omic {

namespace {

struct ThinSvd {
  Matrix u;
  Vector s;
  Matrix v;
};

ThinSvd thin_svd(const Matrix& a) {
  ThinSvd out;
  thin_svd_raw(a, out.u, out.s, out.v);
  return out;
}

Matrix random_orthonormal(Index rows, Index cols, Rng& rng) {
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  return q;
}

// Guards the "no dense m x n matrix" contract of the scalable path: only
// factor-shaped blocks may be allocated once the problem is genuinely large.
void assert_skinny(Index rows, Index cols, Index m, Index n) {
  const double mn = static_cast<double>(m) * static_cast<double>(n);
  if (mn > 16e6 && static_cast<double>(rows) * static_cast<double>(cols) > mn / 4.0)
    throw ContractViolation("scalable path tried to allocate a dense m x n block");
}

// ||U1 d1 V1' - U0 d0 V0'||_F^2 via r x r Gram matrices.
double product_diff_sq(const Matrix& u1, const Vector& d1, const Matrix& v1,
                       const Matrix& u0, const Vector& d0, const Matrix& v0) {
  const double n1 = d1.squaredNorm();
  const double n0 = d0.squaredNorm();
  if (d1.size() == 0 || d0.size() == 0) return n1 + n0;
  const Matrix g_u = u1.transpose() * u0;  // r1 x r0
  const Matrix g_v = v1.transpose() * v0;  // r1 x r0
  const double cross =
      ((d1.asDiagonal() * g_u * d0.asDiagonal()).cwiseProduct(g_v)).sum();
  return std::max(0.0, n1 + n0 - 2.0 * cross);
}

// Component view of the target: the sparse part plus only the low-rank mass
// that survives this cell's projections (other components project to zero, so
// carrying them through the products would be wasted work).
struct CellContext {
  const SpMatrix& sparse;
  const LowRankFactor& lowrank;
  const BasisSide& rows;
  const BasisSide& cols;
  int k;
  int l;
};

// H W with H = P_X^(k) Z P_Y^(l), W being n x r.
Matrix component_mul_right(const CellContext& c, const Matrix& w) {
  const Matrix wp = c.cols.project(c.l, w);
  Matrix out = c.sparse * wp;
  if (c.lowrank.rank() > 0)
    out.noalias() +=
        c.lowrank.U * (c.lowrank.d.asDiagonal() * (c.lowrank.V.transpose() * wp));
  return c.rows.project(c.k, out);
}

// H^T W, W being m x r.
Matrix component_mul_left(const CellContext& c, const Matrix& w) {
  const Matrix wp = c.rows.project(c.k, w);
  Matrix out = c.sparse.transpose() * wp;
  if (c.lowrank.rank() > 0)
    out.noalias() +=
        c.lowrank.V * (c.lowrank.d.asDiagonal() * (c.lowrank.U.transpose() * wp));
  return c.cols.project(c.l, out);
}

// Re-orthonormalization of a product factor via the r x r Gram matrix: much
// cheaper than a tall SVD and accurate enough for inner half-updates (the
// final factors are extracted with a proper SVD).
struct GramSvd {
  Matrix q;       // orthonormal columns of the input, zeros for dead directions
  Vector s;       // singular values, nonincreasing
  Matrix rotate;  // right factor
};

GramSvd gram_orthonormalize(const Matrix& a) {
  const Index r = a.cols();
  const Matrix gram = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  GramSvd out;
  out.s = Vector::Zero(r);
  out.rotate = Matrix::Zero(r, r);
  Vector inv = Vector::Zero(r);
  const double floor =
      std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())) * 1e-10;
  for (Index i = 0; i < r; ++i) {
    const Index src = r - 1 - i;  // eigenvalues arrive ascending
    const double val = std::sqrt(std::max(0.0, es.eigenvalues()[src]));
    out.s[i] = val;
    out.rotate.col(i) = es.eigenvectors().col(src);
    inv[i] = val > floor ? 1.0 / val : 0.0;
  }
  out.q.noalias() = a * (out.rotate * inv.asDiagonal());
  return out;
}

// Final factor pieces from a converged right subspace V: the raw singular
// values of H restricted to span(V) are recovered and soft-thresholded.
struct Extraction {
  LowRankFactor thresholded;  // zeroed directions dropped
  LowRankFactor full;         // all r directions, for warm starts
  double nuclear = 0.0;
  bool cap_hit = false;
};

Extraction extract_factor(const CellContext& c, const Matrix& v, double lambda) {
  Extraction out;
  ThinSvd svd = thin_svd(component_mul_right(c, v));  // SVD of H V, m x r
  Matrix v_rot = v * svd.v;
  out.full.U = svd.u;
  out.full.V = v_rot;
  // Loop-state convention: d^2 equals the thresholded singular values.
  out.full.d = (svd.s.array() - lambda).max(0.0).sqrt().matrix();

  Index keep = 0;
  for (Index i = 0; i < svd.s.size(); ++i) {
    const double s = svd.s[i] - lambda;
    if (s > 0.0) {
      svd.s[keep++] = s;
      out.nuclear += s;
    }
  }
  out.cap_hit = keep == svd.s.size() && lambda > 0.0;
  Matrix u_out = svd.u.leftCols(keep);
  Matrix v_out = v_rot.leftCols(keep);
  canonicalize_signs(u_out, v_out);
  out.thresholded =
      LowRankFactor(std::move(u_out), Vector(svd.s.head(keep)), std::move(v_out));
  return out;
}

// Closed-form thresholding when one side of the component is a known unit
// vector; the SVD of a rank-one slab is just a vector normalization.
LowRankFactor threshold_rank_one(const CellContext& c,
                                 const std::optional<Vector>& x,
                                 const std::optional<Vector>& y, double lambda,
                                 double* nuclear) {
  const Index m = c.sparse.rows(), n = c.sparse.cols();
  auto mul_right = [&c](const Vector& w) {
    Vector out = c.sparse * w;
    if (c.lowrank.rank() > 0)
      out.noalias() +=
          c.lowrank.U * (c.lowrank.d.asDiagonal() * (c.lowrank.V.transpose() * w));
    return out;
  };
  auto mul_left = [&c](const Vector& w) {
    Vector out = c.sparse.transpose() * w;
    if (c.lowrank.rank() > 0)
      out.noalias() +=
          c.lowrank.V * (c.lowrank.d.asDiagonal() * (c.lowrank.U.transpose() * w));
    return out;
  };
  if (x && y) {
    const double val = x->dot(mul_right(*y));
    const double kept = std::max(std::abs(val) - lambda, 0.0);
    *nuclear = kept;
    if (kept <= 0.0) return LowRankFactor::zero(m, n);
    Matrix u = *x;
    if (val < 0.0) u = -u;
    Matrix v = *y;
    Vector d(1);
    d[0] = kept;
    canonicalize_signs(u, v);
    return LowRankFactor(std::move(u), std::move(d), std::move(v));
  }
  if (x) {
    Vector w = c.cols.project(c.l, mul_left(*x));
    const double sigma = w.norm();
    const double kept = std::max(sigma - lambda, 0.0);
    *nuclear = kept;
    if (kept <= 0.0 || sigma <= 0.0) return LowRankFactor::zero(m, n);
    Matrix u = *x;
    Matrix v = w / sigma;
    Vector d(1);
    d[0] = kept;
    canonicalize_signs(u, v);
    return LowRankFactor(std::move(u), std::move(d), std::move(v));
  }
  Vector w = c.rows.project(c.k, mul_right(*y));
  const double sigma = w.norm();
  const double kept = std::max(sigma - lambda, 0.0);
  *nuclear = kept;
  if (kept <= 0.0 || sigma <= 0.0) return LowRankFactor::zero(m, n);
  Matrix u = w / sigma;
  Matrix v = *y;
  Vector d(1);
  d[0] = kept;
  canonicalize_signs(u, v);
  return LowRankFactor(std::move(u), std::move(d), std::move(v));
}

Vector ridge_scale(const Vector& d, double lambda) {
  Vector s(d.size());
  for (Index i = 0; i < d.size(); ++i) {
    const double denom = d[i] * d[i] + lambda;
    s[i] = denom > 0.0 ? d[i] / denom : 0.0;
  }
  return s;
}

}  // namespace

LowRankFactor FactorComponents::concatenated(Index m, Index n) const {
  const Index r = total_rank();
  Matrix u = Matrix::Zero(m, r);
  Matrix v = Matrix::Zero(n, r);
  Vector d = Vector::Zero(r);
  Index at = 0;
  for (const auto& f : factors) {
    if (f.rank() == 0) continue;
    u.middleCols(at, f.rank()) = f.U;
    v.middleCols(at, f.rank()) = f.V;
    d.segment(at, f.rank()) = f.d;
    at += f.rank();
  }
  return LowRankFactor(std::move(u), std::move(d), std::move(v));
}

SvtAlsResult svt_als(const SparsePlusLowRank& z, const BasisFamily& family,
                     const HyperParams& params, const AlsOptions& opts,
                     AlsState* state, const FactorComponents* z_cells) {
  require(z.rows() == family.rows() && z.cols() == family.cols(),
          "svt_als: dimension mismatch");
  require(params.K() == family.K() && params.L() == family.L(),
          "svt_als: hyperparameter shape mismatch");
  require(opts.max_rank >= 1, "svt_als: max_rank must be at least 1");

  const Index m = z.rows(), n = z.cols();
  const int K = family.K(), L = family.L();
  SvtAlsResult out;
  out.components = FactorComponents(K, L, m, n);
  out.nuclear = Matrix::Zero(K, L);
  if (state && state->cells.size() != static_cast<std::size_t>(K * L))
    state->cells.assign(K * L, LowRankFactor());

  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      if (!params.finite(k, l)) continue;
      const Index d1 = family.row_side().block(k).width;
      const Index d2 = family.col_side().block(l).width;
      if (d1 == 0 || d2 == 0) continue;

      // When the low-rank part is already split by component, only this
      // cell's share can survive the projections.
      const LowRankFactor& cell_lr =
          z_cells ? z_cells->at(k, l) : z.lowrank;
      const CellContext ctx{z.sparse, cell_lr, family.row_side(),
                            family.col_side(), k, l};
      const double lambda = params(k, l);

      const auto x = family.row_side().unit_direction(k);
      const auto y = family.col_side().unit_direction(l);
      if ((d1 == 1 && x) || (d2 == 1 && y)) {
        double nuclear = 0.0;
        out.components.at(k, l) =
            threshold_rank_one(ctx, d1 == 1 ? x : std::optional<Vector>{},
                               d2 == 1 ? y : std::optional<Vector>{}, lambda,
                               &nuclear);
        out.nuclear(k, l) = nuclear;
        continue;
      }

      Index r = opts.max_rank;
      if (r > std::min(d1, d2)) {
        r = std::min(d1, d2);
        out.warnings.push_back("component (" + std::to_string(k) + "," +
                               std::to_string(l) + "): rank clamped to block width " +
                               std::to_string(r));
      }
      assert_skinny(m, r, m, n);

      Matrix u, v;
      Vector d;
      LowRankFactor* warm = state ? &state->cells[k * L + l] : nullptr;
      if (warm && warm->U.rows() == m && warm->U.cols() == r) {
        u = warm->U;
        v = warm->V;
        d = warm->d;
        // Revive collapsed directions so they can regrow under a new target.
        const double floor = 1e-3 * std::max(1.0, d.size() ? d.maxCoeff() : 1.0);
        d = d.cwiseMax(floor);
      } else {
        Rng rng(opts.seed * 0x9e3779b97f4a7c15ULL + 1315423911ULL * k + 2654435761ULL * l + 1);
        u = family.row_side().project(k, random_orthonormal(m, r, rng));
        // Re-orthonormalize inside the block's subspace.
        Eigen::HouseholderQR<Matrix> qr(u);
        u = qr.householderQ() * Matrix::Identity(m, r);
        d = Vector::Ones(r);
        v = Matrix::Zero(n, r);
      }

      const int max_sweeps =
          opts.fixed_inner_iters > 0 ? opts.fixed_inner_iters : opts.inner_max_iters;
      Matrix u_prev;
      Vector d_prev;
      Matrix v_prev;
      for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        u_prev = u;
        d_prev = d;
        v_prev = v;

        // Half-update of the right factor.
        Matrix theta = u * ridge_scale(d, lambda).asDiagonal();
        Matrix bt = component_mul_left(ctx, theta);  // n x r
        GramSvd g_b = gram_orthonormalize(bt * d.asDiagonal());
        v = std::move(g_b.q);
        d = g_b.s.cwiseSqrt();
        u = (u * g_b.rotate).eval();  // keep the implied product U d^2 V^T exact

        // Half-update of the left factor.
        theta = v * ridge_scale(d, lambda).asDiagonal();
        Matrix at = component_mul_right(ctx, theta);  // m x r
        GramSvd g_a = gram_orthonormalize(at * d.asDiagonal());
        u = std::move(g_a.q);
        d = g_a.s.cwiseSqrt();
        v = (v * g_a.rotate).eval();

        if (opts.fixed_inner_iters > 0) continue;
        const Vector p1 = d.cwiseProduct(d);
        const Vector p0 = d_prev.cwiseProduct(d_prev);
        const double diff =
            std::sqrt(product_diff_sq(u, p1, v, u_prev, p0, v_prev));
        const double denom = p0.norm();
        if (denom == 0.0 ? diff == 0.0 : diff / denom <= opts.inner_tol) break;
      }

      Extraction ext = extract_factor(ctx, v, lambda);
      if (ext.cap_hit && r == opts.max_rank && r < std::min(d1, d2)) {
        out.rank_cap_hit = true;
        out.warnings.push_back("component (" + std::to_string(k) + "," +
                               std::to_string(l) +
                               "): all " + std::to_string(r) +
                               " singular values survived thresholding; the rank cap "
                               "may be binding");
      }
      if (state) state->cells[k * L + l] = std::move(ext.full);
      out.nuclear(k, l) = ext.nuclear;
      out.components.at(k, l) = std::move(ext.thresholded);
    }
  }
  return out;
}

ScalableFitResult fit_scalable(const SparseObservations& obs,
                               const BasisFamily& family, const HyperParams& params,
                               const AlsOptions& als_opts,
                               const SolveOptions& outer_opts) {
  require(obs.rows == family.rows() && obs.cols == family.cols(),
          "fit_scalable: dimension mismatch");
  require(outer_opts.tol > 0.0 && outer_opts.max_iters >= 1,
          "fit_scalable: bad solve options");

  const Index m = obs.rows, n = obs.cols;
  const UniqueObservations unique = UniqueObservations::from(obs);
  const double c = std::max(1.0, unique.max_weight);
  const HyperParams step_params = params.scaled(1.0 / c);

  // Observed coordinates as a compressed sparse matrix whose value slots are
  // rewritten each outer iteration. UniqueObservations sorts by (col, row),
  // matching the column-major storage order exactly.
  SpMatrix sp(m, n);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(unique.records.size());
    for (const auto& rec : unique.records) trips.emplace_back(rec.i, rec.j, 0.0);
    sp.setFromTriplets(trips.begin(), trips.end());
    sp.makeCompressed();
    require(static_cast<std::size_t>(sp.nonZeros()) == unique.records.size(),
            "fit_scalable: duplicate coordinates survived deduplication");
    std::size_t t = 0;
    for (Index col = 0; col < sp.outerSize(); ++col)
      for (SpMatrix::InnerIterator it(sp, col); it; ++it, ++t)
        if (it.row() != unique.records[t].i || it.col() != unique.records[t].j)
          throw ContractViolation("fit_scalable: sparse slot order mismatch");
  }

  ScalableFitResult out;
  out.components = FactorComponents(family.K(), family.L(), m, n);
  AlsState state;
  SolveTrace& trace = out.trace;
  std::vector<std::string> last_cap_warnings;
  double prev_objective = std::numeric_limits<double>::infinity();

  SparsePlusLowRank target;
  target.sparse = std::move(sp);
  target.lowrank = LowRankFactor::zero(m, n);  // low-rank mass travels per cell

  for (int it = 0; it < outer_opts.max_iters; ++it) {
    const PredictCache cache(out.components.concatenated(m, n));
    double* values = target.sparse.valuePtr();
    for (std::size_t t = 0; t < unique.records.size(); ++t) {
      const auto& rec = unique.records[t];
      values[t] = (rec.weight / c) * (rec.mean - cache(rec.i, rec.j));
    }

    SvtAlsResult step =
        svt_als(target, family, step_params, als_opts, &state, &out.components);
    // Rank-cap warnings only matter for the final sweep: earlier targets are
    // transient and may legitimately carry more mass than the solution.
    last_cap_warnings.clear();
    for (auto& w : step.warnings) {
      if (w.find("rank cap") != std::string::npos) {
        last_cap_warnings.push_back(std::move(w));
      } else if (std::find(out.warnings.begin(), out.warnings.end(), w) ==
                 out.warnings.end()) {
        out.warnings.push_back(std::move(w));
      }
    }

    // Relative change measured per component through factor Gram matrices;
    // components live in orthogonal subspaces, so the squares add up.
    double diff_sq = 0.0, prev_sq = 0.0;
    for (int k = 0; k < family.K(); ++k)
      for (int l = 0; l < family.L(); ++l) {
        const auto& f_new = step.components.at(k, l);
        const auto& f_old = out.components.at(k, l);
        diff_sq += product_diff_sq(f_new.U, f_new.d, f_new.V, f_old.U, f_old.d, f_old.V);
        prev_sq += f_old.d.squaredNorm();
      }
    const double change = std::sqrt(diff_sq);
    const double denom = std::max(1.0, std::sqrt(prev_sq));

    out.components = std::move(step.components);

    double reg = 0.0;
    for (int k = 0; k < family.K(); ++k)
      for (int l = 0; l < family.L(); ++l)
        if (params.finite(k, l) && params(k, l) > 0.0)
          reg += params(k, l) * step.nuclear(k, l);
    const PredictCache new_cache(out.components.concatenated(m, n));
    double data = unique.constant_loss;
    for (const auto& rec : unique.records) {
      const double r = rec.mean - new_cache(rec.i, rec.j);
      data += 0.5 * rec.weight * r * r;
    }
    const double obj = reg + data;

    trace.iterations = it + 1;
    if (obj > prev_objective)
      trace.monotone_violation = std::max(trace.monotone_violation, obj - prev_objective);
    prev_objective = obj;
    trace.final_objective = obj;
    if (outer_opts.record_trace) trace.points.push_back({obj, change});

    if (change / denom < outer_opts.tol) {
      trace.converged = true;
      break;
    }
  }
  for (auto& w : last_cap_warnings) out.warnings.push_back(std::move(w));
  return out;
}

}  // namespace omic
