#pragma once

#include <vector>

#include "omic/types.hpp"

namespace omic {

/// Partition of [0, size) into nonempty communities with dense ids.
struct CommunityAssignment {
  Index size = 0;
  std::vector<int> community_of;  // size entries, values in [0, num_communities)
  int num_communities = 0;

  CommunityAssignment() = default;
  CommunityAssignment(Index n, std::vector<int> assignment);

  /// Everyone in one community.
  static CommunityAssignment single(Index n);

  /// `count` equal contiguous blocks; n must be divisible by count.
  static CommunityAssignment equal_blocks(Index n, int count);

  const std::vector<Index>& members(int c) const { return members_[c]; }
  Index community_size(int c) const { return static_cast<Index>(members_[c].size()); }

  bool operator==(const CommunityAssignment& other) const {
    return size == other.size && community_of == other.community_of;
  }

  std::uint64_t digest() const;

 private:
  std::vector<std::vector<Index>> members_;
};

}  // namespace omic
