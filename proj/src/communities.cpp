#include "omic/communities.hpp"

#include <numeric>

namespace omic {

CommunityAssignment::CommunityAssignment(Index n, std::vector<int> assignment)
    : size(n), community_of(std::move(assignment)) {
  require(n >= 1, "community assignment needs at least one index");
  require(static_cast<Index>(community_of.size()) == n,
          "community assignment must cover every index");
  int maxc = -1;
  for (int c : community_of) {
    require(c >= 0, "community ids must be nonnegative");
    maxc = std::max(maxc, c);
  }
  num_communities = maxc + 1;
  members_.resize(num_communities);
  for (Index i = 0; i < n; ++i) members_[community_of[i]].push_back(i);
  for (int c = 0; c < num_communities; ++c)
    require(!members_[c].empty(), "community " + std::to_string(c) + " is empty");
}

CommunityAssignment CommunityAssignment::single(Index n) {
  return CommunityAssignment(n, std::vector<int>(n, 0));
}

CommunityAssignment CommunityAssignment::equal_blocks(Index n, int count) {
  require(count >= 1 && n % count == 0,
          "equal_blocks requires the dimension to be divisible by the community count");
  std::vector<int> a(n);
  const Index block = n / count;
  for (Index i = 0; i < n; ++i) a[i] = static_cast<int>(i / block);
  return CommunityAssignment(n, std::move(a));
}

std::uint64_t CommunityAssignment::digest() const {
  // FNV-1a over the assignment sequence.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(size));
  for (int c : community_of) mix(static_cast<std::uint64_t>(c));
  return h;
}

}  // namespace omic
