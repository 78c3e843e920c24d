#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abxi/corpus.hpp"

namespace abxi {

enum class SyntheticProfile { kSharedInterest, kMismatchHeavy, kRandom };
SyntheticProfile parse_profile(const std::string& s);  // "shared-interest" | "mismatch-heavy" | "random"
std::string_view to_string(SyntheticProfile p);

struct SyntheticOptions {
  SyntheticProfile profile = SyntheticProfile::kSharedInterest;
  int n_users = 2000;
  std::uint64_t seed = 0;
  int items_per_domain = 200;  // multiple of kSlots for shared-interest
  int min_len = 8;
  int max_len = 20;
  // mismatch-heavy: probability that an item ignores its in-domain chain.
  double noise = 0.2;
};

// Shared-interest items are laid out as clusters of kSlots; a user's latent
// interest fixes the slot, and the cluster advances by (1 + latent) per step.
inline constexpr int kSlots = 10;

// Local (0-based, within-domain) index of the item following `last_local`
// under the shared-interest rule; the domain of the next item is free.
int shared_interest_next(int last_local, int items_per_domain);

// Local index of the in-domain successor under the mismatch-heavy chain.
int mismatch_chain_next(int prev_local, int items_per_domain);

// Raw item id for a local index, e.g. ("A", 17) -> "a0017".
std::string synthetic_item_id(Domain d, int local);

std::vector<Interaction> generate_synthetic(const SyntheticOptions& opts);

}  // namespace abxi
