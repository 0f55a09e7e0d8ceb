#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omic/communities.hpp"
#include "omic/sparse.hpp"

namespace omic {

/// Rating triplets with the id remapping that produced the dense indices.
struct TripletData {
  SparseObservations observations;
  std::vector<std::string> user_ids;  // original id per dense row index
  std::vector<std::string> item_ids;  // original id per dense column index

  std::optional<Index> user_index(const std::string& id) const;
  std::optional<Index> item_index(const std::string& id) const;

 private:
  mutable std::map<std::string, Index> user_lookup_;
  mutable std::map<std::string, Index> item_lookup_;
};

/// Parse "user item rating" records. The delimiter is auto-detected among
/// tab, comma and "::"; extra trailing fields (e.g. timestamps) are ignored;
/// an optional header line is skipped. Ids are remapped to dense 0-based
/// indices in order of first appearance. Files ending in .gz are decompressed
/// transparently.
TripletData load_triplets(const std::string& path);

/// Raw "id label" pairs from a community file, labels remapped densely in
/// lexicographic order. Duplicate ids with conflicting labels are an error.
struct RawCommunities {
  std::map<std::string, int> label_of_id;
  int num_labels = 0;
};

RawCommunities load_communities_raw(const std::string& path);

/// Bind raw communities to a universe of original ids (one per dense index).
/// Every id in the universe must be covered.
CommunityAssignment bind_communities(const RawCommunities& raw,
                                     const std::vector<std::string>& universe);

/// Standalone form used when ids are plain 0-based integers: the universe is
/// {0, ..., max_id}.
CommunityAssignment load_communities(const std::string& path);

struct SplitResult {
  SparseObservations train;
  SparseObservations validation;
  SparseObservations test;
};

/// Seeded uniform partition of the observed entries. Sizes follow
/// largest-remainder rounding of the ratios (which must sum to 1).
SplitResult split(const SparseObservations& obs, double train_ratio,
                  double validation_ratio, double test_ratio, std::uint64_t seed);

/// Synthetic bias-vs-specific mixture instance.
struct SyntheticInstance {
  Matrix full;  // m x n ground truth R(alpha)
  SparseObservations observed;
  double alpha = 0.0;
  int gamma = 1;
  double p_obs = 0.0;
  double c = 0.0;
  std::uint64_t seed = 0;
  Index top_half_count = 0;
};

/// Ground truth R(alpha) = alpha*c*G + (1-alpha)*c*S, where G is a sum of
/// user- and item-bias rank-one terms and S is a +-1/(mn) checkerboard of
/// half-blocks. Observations are drawn without replacement: a fraction
/// gamma/(gamma+1) of the budget from the top half of the rows, the rest from
/// the bottom half (gamma = 1 is uniform sampling).
SyntheticInstance gen_synthetic(double alpha, int gamma, double p_obs, Index m,
                                Index n, double c, std::uint64_t seed);

/// Community-structured ground truth for sample-complexity sweeps: a
/// blockwise Rademacher community component plus C times a max-normalized
/// rank-r residual drawn inside the complement subspace. Square case with
/// equal-size communities (m divisible by a).
struct BoundInstance {
  Matrix full;
  CommunityAssignment users;
  CommunityAssignment items;
  int a = 0;
  int r = 0;
  double C = 0.0;
};

BoundInstance gen_bound_matrix(int a, int r, double C, Index m, std::uint64_t seed);

enum class SamplingMode { kUniform, kCheckerboard };

/// Seeded ordering of candidate entries for nested observation sweeps.
/// Checkerboard mode restricts to entries with i = j (mod 2).
std::vector<std::pair<Index, Index>> entry_ordering(Index m, Index n,
                                                    SamplingMode mode,
                                                    std::uint64_t seed);

}  // namespace omic
