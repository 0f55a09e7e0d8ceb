#pragma once

#include <optional>
#include <string>
#include <vector>

#include "omic/scalable.hpp"

namespace omic {

/// Everything needed to rebuild a basis family deterministically.
struct FamilyDescriptor {
  FamilyKind kind = FamilyKind::kSoftImpute;
  Index m = 0;
  Index n = 0;
  std::optional<CommunityAssignment> users;
  std::optional<CommunityAssignment> items;
  std::vector<Matrix> explicit_row_blocks;  // kExplicit only
  std::vector<Matrix> explicit_col_blocks;
  bool explicit_residual_rows = false;
  bool explicit_residual_cols = false;

  BasisFamily build() const;
};

struct FitMeta {
  std::uint64_t seed = 0;
  int iterations = 0;
  double objective = 0.0;
  std::string solver;  // "dense" or "scalable"
};

/// A trained model: basis family plus per-component cores or factors.
/// Immutable after construction; predict/explain are safe for concurrent
/// readers.
class FittedModel {
 public:
  enum class Storage { kDense, kFactor };

  FittedModel() = default;
  FittedModel(FamilyDescriptor desc, DenseComponents cores, HyperParams params,
              FitMeta meta);
  FittedModel(FamilyDescriptor desc, FactorComponents factors, HyperParams params,
              FitMeta meta);

  Storage storage() const { return storage_; }
  const BasisFamily& family() const { return family_; }
  const FamilyDescriptor& descriptor() const { return desc_; }
  const HyperParams& params() const { return params_; }
  const FitMeta& meta() const { return meta_; }
  const DenseComponents& cores() const { return cores_; }
  const FactorComponents& factors() const { return factors_; }
  Index rows() const { return desc_.m; }
  Index cols() const { return desc_.n; }

  double predict(Index i, Index j) const;

  /// Per-component addends of predict(i, j); they sum to the prediction.
  Matrix explain_entry(Index i, Index j) const;

  /// Frobenius norm of each component core (equal to the norm of the
  /// assembled component by rotational invariance).
  Matrix component_norms() const;

  struct Biases {
    double global = 0.0;
    Vector user;  // sums to zero
    Vector item;  // sums to zero
  };

  /// Global/user/item biases read off the mean-direction components. Only
  /// families with a global-mean block support this.
  Biases extract_biases() const;

  /// Optional id remap tables (original ids per dense index).
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  void save(const std::string& path) const;
  static FittedModel load(const std::string& path);

 private:
  void init_predictors();
  double cell_value(int k, int l, Index i, Index j) const;

  FamilyDescriptor desc_;
  BasisFamily family_;
  Storage storage_ = Storage::kDense;
  DenseComponents cores_;
  FactorComponents factors_;
  HyperParams params_;
  FitMeta meta_;

  // Row-accessible per-cell prediction state. Dense path: left holds
  // X^(k) M^(k,l) and the shared right factors are the materialized Y^(l);
  // factor path: left/right hold U diag(d) and V per cell.
  std::vector<RowMatrix> cell_left_;
  std::vector<RowMatrix> cell_right_;   // factor path
  std::vector<RowMatrix> block_right_;  // dense path, one per column block
};

}  // namespace omic
