#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "omic/communities.hpp"
#include "omic/types.hpp"

namespace omic {

enum class BlockKind {
  kGlobalMean,             // span of the constant direction, width 1
  kCommunitySpan,          // span of normalized community indicators
  kCommunityMeanResidual,  // community span minus the constant direction
  kFullResidual,           // complement of everything before it
  kExplicit,               // caller-provided orthonormal columns
};

enum class FamilyKind { kSoftImpute, kBomic, kOmicPlus, kBomicPlus, kExplicit };

std::string to_string(FamilyKind kind);
std::string to_string(BlockKind kind);

struct BasisBlock {
  BlockKind kind = BlockKind::kFullResidual;
  Index width = 0;
  Matrix explicit_cols;  // kExplicit only
};

/// One side (row space or column space) of a basis family: an ordered list of
/// blocks whose projectors sum to the identity. Community-backed blocks never
/// materialize their orthonormal complements; all access goes through
/// project(). An explicit orthonormal basis per block can be materialized on
/// demand for the dense reference path.
class BasisSide {
 public:
  BasisSide() = default;

  static BasisSide identity(Index dim);
  static BasisSide bomic(Index dim);
  static BasisSide omicplus(const CommunityAssignment& communities);
  static BasisSide bomicplus(const CommunityAssignment& communities);
  /// Caller-provided blocks; when complete_with_residual is set, a trailing
  /// implicit block absorbs the orthogonal complement.
  static BasisSide explicit_blocks(Index dim, std::vector<Matrix> blocks,
                                   bool complete_with_residual);

  Index dim() const { return dim_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const BasisBlock& block(int k) const { return blocks_[k]; }
  const std::optional<CommunityAssignment>& communities() const { return communities_; }

  /// Projection of W onto block k's span: X^(k) (X^(k))^T W.
  Matrix project(int k, const Matrix& w) const;

  /// True when this side is a single block spanning everything, so that
  /// projections and basis products are identities.
  bool is_identity() const {
    return blocks_.size() == 1 && blocks_[0].width == dim_ &&
           blocks_[0].kind == BlockKind::kFullResidual;
  }

  /// If block k is one-dimensional with a cheaply known direction, return it.
  std::optional<Vector> unit_direction(int k) const;

  /// Explicit orthonormal basis of block k, built once by deterministic
  /// orthonormal completion and cached. Dense reference path only.
  const Matrix& materialized(int k) const;

 private:
  Matrix tilde_project(const Matrix& w) const;      // community or mean span
  Matrix mean_project(const Matrix& w) const;       // constant direction
  Matrix community_project(const Matrix& w) const;  // per-community means

  void build_materialized() const;

  Index dim_ = 0;
  std::vector<BasisBlock> blocks_;
  std::optional<CommunityAssignment> communities_;

  mutable std::mutex cache_mutex_;
  mutable std::vector<Matrix> cache_;

  friend class BasisFamily;

 public:
  BasisSide(const BasisSide& other)
      : dim_(other.dim_), blocks_(other.blocks_), communities_(other.communities_) {}
  BasisSide& operator=(const BasisSide& other) {
    if (this != &other) {
      dim_ = other.dim_;
      blocks_ = other.blocks_;
      communities_ = other.communities_;
      std::lock_guard<std::mutex> lock(cache_mutex_);
      cache_.clear();
    }
    return *this;
  }
};

struct ValidationReport {
  double max_orthonormality_violation = 0.0;
  double max_cross_block = 0.0;
  bool widths_ok = false;
  bool pass = false;
};

/// The pair of basis sides defining an OMIC model instance, plus the kind tag
/// used for labeling, serialization and bias extraction.
class BasisFamily {
 public:
  BasisFamily() = default;
  BasisFamily(FamilyKind kind, BasisSide rows, BasisSide cols)
      : kind_(kind), rows_(std::move(rows)), cols_(std::move(cols)) {}

  static BasisFamily softimpute(Index m, Index n);
  static BasisFamily bomic(Index m, Index n);
  static BasisFamily omicplus(const CommunityAssignment& users,
                              const CommunityAssignment& items);
  static BasisFamily bomicplus(const CommunityAssignment& users,
                               const CommunityAssignment& items);

  FamilyKind kind() const { return kind_; }
  Index rows() const { return rows_.dim(); }
  Index cols() const { return cols_.dim(); }
  int K() const { return rows_.num_blocks(); }
  int L() const { return cols_.num_blocks(); }
  const BasisSide& row_side() const { return rows_; }
  const BasisSide& col_side() const { return cols_; }

  /// Human-readable label for the (k, l) component, e.g. "global bias".
  std::string cell_label(int k, int l) const;

 private:
  FamilyKind kind_ = FamilyKind::kSoftImpute;
  BasisSide rows_;
  BasisSide cols_;
};

/// Orthonormality / cross-block / width-sum report; passes iff every
/// violation is at most `tol`. Projector checks use seeded random probes.
ValidationReport validate(const BasisFamily& family, double tol = 1e-8);

}  // namespace omic
