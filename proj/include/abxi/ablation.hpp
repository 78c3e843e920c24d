#pragma once

#include <optional>
#include <string>
#include <vector>

#include "abxi/model.hpp"

namespace abxi {

// Names of the full variant grid, in table order.
const std::vector<std::string>& variant_names();

// Returns `base` rewired as the named variant; throws ConfigError for
// unknown names.
ModelConfig build_variant(const std::string& name, const ModelConfig& base);

enum class RankTarget { kDomain, kInvariant };  // r_d (dLoRA) or r_i (iLoRA)
RankTarget parse_rank_target(const std::string& s);  // "d" | "i"

struct RankPoint {
  std::string label;  // "0", "4", ..., "proj"
  ModelConfig config;
};

// Each point differs from `base` only in the swept adapter: rank 0 maps to
// the removal variant (V1 / V3), "proj" to the dense replacement (V_dp3 /
// V_ip3). Ranks outside {0,4,8,16,32,64,128} or >= d are rejected.
std::vector<RankPoint> rank_sweep(const ModelConfig& base, RankTarget target,
                                  const std::vector<std::string>& ranks);

}  // namespace abxi
