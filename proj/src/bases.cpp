#include "omic/bases.hpp"

#include <algorithm>

#include "omic/rng.hpp"

namespace omic {

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::kSoftImpute: return "softimpute";
    case FamilyKind::kBomic: return "bomic";
    case FamilyKind::kOmicPlus: return "omicplus";
    case FamilyKind::kBomicPlus: return "bomicplus";
    case FamilyKind::kExplicit: return "explicit";
  }
  return "?";
}

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kGlobalMean: return "mean";
    case BlockKind::kCommunitySpan: return "community";
    case BlockKind::kCommunityMeanResidual: return "community-residual";
    case BlockKind::kFullResidual: return "residual";
    case BlockKind::kExplicit: return "explicit";
  }
  return "?";
}

BasisSide BasisSide::identity(Index dim) {
  require(dim >= 1, "basis side dimension must be positive");
  BasisSide side;
  side.dim_ = dim;
  side.blocks_.push_back({BlockKind::kFullResidual, dim, {}});
  return side;
}

BasisSide BasisSide::bomic(Index dim) {
  require(dim >= 2, "bomic needs dimension >= 2");
  BasisSide side;
  side.dim_ = dim;
  side.blocks_.push_back({BlockKind::kGlobalMean, 1, {}});
  side.blocks_.push_back({BlockKind::kFullResidual, dim - 1, {}});
  return side;
}

BasisSide BasisSide::omicplus(const CommunityAssignment& communities) {
  BasisSide side;
  side.dim_ = communities.size;
  side.communities_ = communities;
  const Index a = communities.num_communities;
  side.blocks_.push_back({BlockKind::kCommunitySpan, a, {}});
  side.blocks_.push_back({BlockKind::kFullResidual, side.dim_ - a, {}});
  return side;
}

BasisSide BasisSide::bomicplus(const CommunityAssignment& communities) {
  BasisSide side;
  side.dim_ = communities.size;
  side.communities_ = communities;
  const Index a = communities.num_communities;
  side.blocks_.push_back({BlockKind::kGlobalMean, 1, {}});
  side.blocks_.push_back({BlockKind::kCommunityMeanResidual, a - 1, {}});
  side.blocks_.push_back({BlockKind::kFullResidual, side.dim_ - a, {}});
  return side;
}

BasisSide BasisSide::explicit_blocks(Index dim, std::vector<Matrix> blocks,
                                     bool complete_with_residual) {
  require(dim >= 1, "basis side dimension must be positive");
  BasisSide side;
  side.dim_ = dim;
  Index total = 0;
  for (auto& b : blocks) {
    require(b.rows() == dim, "explicit block has wrong row count");
    require(b.cols() >= 1, "explicit block must have at least one column");
    total += b.cols();
    side.blocks_.push_back({BlockKind::kExplicit, b.cols(), std::move(b)});
  }
  if (complete_with_residual) {
    require(total < dim, "no room left for a residual block");
    side.blocks_.push_back({BlockKind::kFullResidual, dim - total, {}});
    total = dim;
  }
  require(total == dim, "explicit block widths must sum to the dimension");
  return side;
}

Matrix BasisSide::mean_project(const Matrix& w) const {
  Eigen::RowVectorXd col_means = w.colwise().mean();
  return Vector::Ones(dim_) * col_means;
}

Matrix BasisSide::community_project(const Matrix& w) const {
  const auto& comm = *communities_;
  Matrix sums = Matrix::Zero(comm.num_communities, w.cols());
  for (Index i = 0; i < dim_; ++i) sums.row(comm.community_of[i]) += w.row(i);
  for (int c = 0; c < comm.num_communities; ++c)
    sums.row(c) /= static_cast<double>(comm.community_size(c));
  Matrix out(dim_, w.cols());
  for (Index i = 0; i < dim_; ++i) out.row(i) = sums.row(comm.community_of[i]);
  return out;
}

Matrix BasisSide::project(int k, const Matrix& w) const {
  require(k >= 0 && k < num_blocks(), "block index out of range");
  require(w.rows() == dim_, "project: row count must equal the side dimension");
  const BasisBlock& b = blocks_[k];
  if (b.width == 0) return Matrix::Zero(w.rows(), w.cols());
  switch (b.kind) {
    case BlockKind::kGlobalMean:
      return mean_project(w);
    case BlockKind::kCommunitySpan:
      return community_project(w);
    case BlockKind::kCommunityMeanResidual:
      return community_project(w) - mean_project(w);
    case BlockKind::kFullResidual: {
      Matrix out = w;
      for (int kk = 0; kk < k; ++kk) out -= project(kk, w);
      return out;
    }
    case BlockKind::kExplicit:
      return b.explicit_cols * (b.explicit_cols.transpose() * w);
  }
  throw ContractViolation("unreachable block kind");
}

std::optional<Vector> BasisSide::unit_direction(int k) const {
  const BasisBlock& b = blocks_[k];
  if (b.width != 1) return std::nullopt;
  switch (b.kind) {
    case BlockKind::kGlobalMean:
      return Vector::Constant(dim_, 1.0 / std::sqrt(static_cast<double>(dim_)));
    case BlockKind::kCommunitySpan:
      // single community == constant direction
      return Vector::Constant(dim_, 1.0 / std::sqrt(static_cast<double>(dim_)));
    case BlockKind::kCommunityMeanResidual: {
      // Two communities leave one direction: community-constant and mean-free.
      const auto& comm = *communities_;
      if (comm.num_communities != 2) return std::nullopt;
      Vector w(dim_);
      const double w0 = 1.0 / static_cast<double>(comm.community_size(0));
      const double w1 = -1.0 / static_cast<double>(comm.community_size(1));
      for (Index i = 0; i < dim_; ++i) w[i] = comm.community_of[i] == 0 ? w0 : w1;
      w /= w.norm();
      return w;
    }
    case BlockKind::kExplicit:
      return Vector(b.explicit_cols.col(0));
    default:
      return std::nullopt;
  }
}

namespace {

// Modified Gram-Schmidt with one re-orthogonalization pass. Appends the part
// of `v` orthogonal to `accepted` if it is numerically independent.
bool mgs_append(std::vector<Vector>& accepted, Vector v, double tol) {
  for (int pass = 0; pass < 2; ++pass)
    for (const Vector& q : accepted) v -= q.dot(v) * q;
  const double nrm = v.norm();
  if (nrm <= tol) return false;
  accepted.push_back(v / nrm);
  return true;
}

}  // namespace

void BasisSide::build_materialized() const {
  std::vector<Matrix> result(blocks_.size());
  std::vector<Vector> accepted;
  accepted.reserve(dim_);
  const double tol = 1e-8;

  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const BasisBlock& b = blocks_[k];
    const std::size_t before = accepted.size();

    auto push_seed = [&](const Vector& v) { mgs_append(accepted, v, tol); };

    switch (b.kind) {
      case BlockKind::kGlobalMean:
        push_seed(Vector::Ones(dim_));
        break;
      case BlockKind::kCommunitySpan:
      case BlockKind::kCommunityMeanResidual: {
        const auto& comm = *communities_;
        for (int c = 0; c < comm.num_communities; ++c) {
          Vector ind = Vector::Zero(dim_);
          for (Index i : comm.members(c)) ind[i] = 1.0;
          push_seed(ind);
        }
        break;
      }
      case BlockKind::kFullResidual:
        for (Index i = 0; i < dim_ && accepted.size() < before + static_cast<std::size_t>(b.width); ++i)
          push_seed(Vector::Unit(dim_, i));
        break;
      case BlockKind::kExplicit:
        for (Index c = 0; c < b.explicit_cols.cols(); ++c)
          push_seed(Vector(b.explicit_cols.col(c)));
        break;
    }

    const Index got = static_cast<Index>(accepted.size() - before);
    if (got != b.width)
      throw ContractViolation("orthonormal completion produced width " +
                              std::to_string(got) + ", expected " +
                              std::to_string(b.width));
    Matrix x(dim_, b.width);
    for (Index c = 0; c < b.width; ++c) x.col(c) = accepted[before + c];
    result[k] = std::move(x);
  }
  cache_ = std::move(result);
}

const Matrix& BasisSide::materialized(int k) const {
  require(k >= 0 && k < num_blocks(), "block index out of range");
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (cache_.empty()) build_materialized();
  return cache_[k];
}

BasisFamily BasisFamily::softimpute(Index m, Index n) {
  return BasisFamily(FamilyKind::kSoftImpute, BasisSide::identity(m), BasisSide::identity(n));
}

BasisFamily BasisFamily::bomic(Index m, Index n) {
  require(m >= 2 && n >= 2, "bomic needs m, n >= 2");
  return BasisFamily(FamilyKind::kBomic, BasisSide::bomic(m), BasisSide::bomic(n));
}

BasisFamily BasisFamily::omicplus(const CommunityAssignment& users,
                                  const CommunityAssignment& items) {
  return BasisFamily(FamilyKind::kOmicPlus, BasisSide::omicplus(users),
                     BasisSide::omicplus(items));
}

BasisFamily BasisFamily::bomicplus(const CommunityAssignment& users,
                                   const CommunityAssignment& items) {
  return BasisFamily(FamilyKind::kBomicPlus, BasisSide::bomicplus(users),
                     BasisSide::bomicplus(items));
}

std::string BasisFamily::cell_label(int k, int l) const {
  const BlockKind rk = rows_.block(k).kind;
  const BlockKind ck = cols_.block(l).kind;
  auto is_mean = [](BlockKind b) { return b == BlockKind::kGlobalMean; };
  auto is_comm = [](BlockKind b) {
    return b == BlockKind::kCommunitySpan || b == BlockKind::kCommunityMeanResidual;
  };
  if (kind_ == FamilyKind::kSoftImpute) return "matrix";
  if (is_mean(rk) && is_mean(ck)) return "global bias";
  if (is_mean(rk) && is_comm(ck)) return "item-community bias";
  if (is_comm(rk) && is_mean(ck)) return "user-community bias";
  if (is_mean(rk)) return "item bias";
  if (is_mean(ck)) return "user bias";
  if (is_comm(rk) && is_comm(ck)) return "community x community";
  if (is_comm(rk)) return "user-community x item";
  if (is_comm(ck)) return "user x item-community";
  return "user x item residual";
}

ValidationReport validate(const BasisFamily& family, double tol) {
  ValidationReport report;

  Index width_sum_rows = 0, width_sum_cols = 0;
  for (int k = 0; k < family.K(); ++k) width_sum_rows += family.row_side().block(k).width;
  for (int l = 0; l < family.L(); ++l) width_sum_cols += family.col_side().block(l).width;
  report.widths_ok =
      width_sum_rows == family.rows() && width_sum_cols == family.cols();

  Rng rng(20240811);
  auto probe = [&](Index dim) {
    const Index cols = std::min<Index>(8, dim);
    Matrix w(dim, cols);
    for (Index i = 0; i < dim; ++i)
      for (Index j = 0; j < cols; ++j) w(i, j) = rng.gaussian();
    w /= w.norm();
    return w;
  };

  auto check_side = [&](const BasisSide& side) {
    const Matrix w = probe(side.dim());
    Matrix sum = Matrix::Zero(w.rows(), w.cols());
    std::vector<Matrix> proj(side.num_blocks());
    for (int k = 0; k < side.num_blocks(); ++k) {
      proj[k] = side.project(k, w);
      sum += proj[k];
      const double idem = (side.project(k, proj[k]) - proj[k]).norm();
      report.max_orthonormality_violation =
          std::max(report.max_orthonormality_violation, idem);
      if (side.block(k).kind == BlockKind::kExplicit) {
        const Matrix& q = side.block(k).explicit_cols;
        const double gram =
            (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
        report.max_orthonormality_violation =
            std::max(report.max_orthonormality_violation, gram);
      }
      for (int kk = 0; kk < k; ++kk) {
        double cross = side.project(kk, proj[k]).norm();
        if (side.block(k).kind == BlockKind::kExplicit &&
            side.block(kk).kind == BlockKind::kExplicit) {
          cross = std::max(cross, (side.block(kk).explicit_cols.transpose() *
                                   side.block(k).explicit_cols)
                                      .cwiseAbs()
                                      .maxCoeff());
        }
        report.max_cross_block = std::max(report.max_cross_block, cross);
      }
    }
    report.max_orthonormality_violation =
        std::max(report.max_orthonormality_violation, (sum - w).norm());
  };

  check_side(family.row_side());
  check_side(family.col_side());

  report.pass = report.widths_ok && report.max_orthonormality_violation <= tol &&
                report.max_cross_block <= tol;
  return report;
}

}  // namespace omic
