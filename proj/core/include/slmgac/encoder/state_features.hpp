#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace slmgac::encoder {

inline constexpr std::size_t kMaxHistory = 50;

/// Raw per-request state: categorical ids for the user and the candidate live
/// stream, plus the two bounded watch histories. Ids are raw; the embedding
/// layer hashes them into its row range.
struct StateFeatures {
  std::vector<std::uint64_t> user_static_ids;
  std::vector<std::uint64_t> live_item_ids;
  std::vector<std::uint64_t> live_history_ids;
  std::vector<std::uint64_t> video_history_ids;
  int group_id = 0;

  bool operator==(const StateFeatures&) const = default;
};

}  // namespace slmgac::encoder
