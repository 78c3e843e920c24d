#include "abxi/ablation.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include <fmt/format.h>

#include "abxi/error.hpp"

namespace abxi {

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> kNames{"ABXI", "V_ts", "V1",    "V2",    "V3",
                                               "V4",   "V_e3", "V_dp3", "V_ip3", "V_ip2"};
  return kNames;
}

ModelConfig build_variant(const std::string& name, const ModelConfig& base) {
  ModelConfig c = base;
  VariantFlags v;  // full-model wiring
  v.name = name;
  if (name == "ABXI") {
  } else if (name == "V_ts") {
    v.alignment = AlignmentMode::kTimestamp;
  } else if (name == "V1") {
    v.domain_adapter = DomainAdapter::kOff;
  } else if (name == "V2") {
    v.projectors = false;
  } else if (name == "V3") {
    v.invariant_adapter = InvariantAdapter::kOff;
  } else if (name == "V4") {
    v.domain_adapter = DomainAdapter::kOff;
    v.invariant_adapter = InvariantAdapter::kOff;
    v.projectors = false;
  } else if (name == "V_e3") {
    v.domain_adapter = DomainAdapter::kThreeEncoders;
  } else if (name == "V_dp3") {
    v.domain_adapter = DomainAdapter::kThreeProjectors;
  } else if (name == "V_ip3") {
    v.invariant_adapter = InvariantAdapter::kThreeProjectors;
  } else if (name == "V_ip2") {
    v.invariant_adapter = InvariantAdapter::kTwoProjectors;
  } else {
    throw ConfigError(fmt::format("unknown variant '{}'", name));
  }
  c.variant = v;
  return c;
}

RankTarget parse_rank_target(const std::string& s) {
  if (s == "d") return RankTarget::kDomain;
  if (s == "i") return RankTarget::kInvariant;
  throw ConfigError(fmt::format("rank target must be 'd' or 'i', got '{}'", s));
}

std::vector<RankPoint> rank_sweep(const ModelConfig& base, RankTarget target, const std::vector<std::string>& ranks) {
  static constexpr std::array<int, 7> kAllowed{0, 4, 8, 16, 32, 64, 128};
  std::vector<RankPoint> out;
  for (const auto& label : ranks) {
    ModelConfig c = base;
    if (label == "proj") {
      if (target == RankTarget::kDomain) {
        c.variant.domain_adapter = DomainAdapter::kThreeProjectors;
        c.variant.name = "V_dp3";
      } else {
        c.variant.invariant_adapter = InvariantAdapter::kThreeProjectors;
        c.variant.name = "V_ip3";
      }
      out.push_back({label, c});
      continue;
    }
    int r = -1;
    const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), r);
    if (ec != std::errc() || ptr != label.data() + label.size() ||
        std::find(kAllowed.begin(), kAllowed.end(), r) == kAllowed.end()) {
      throw ConfigError(fmt::format("rank '{}' is not one of 0,4,8,16,32,64,128,proj", label));
    }
    if (r >= base.d) throw ConfigError(fmt::format("rank {} must be smaller than d={}", r, base.d));
    if (target == RankTarget::kDomain) {
      c.rank_d = r;
      if (r == 0) {
        c.variant.domain_adapter = DomainAdapter::kOff;
        c.variant.name = "V1";
      }
    } else {
      c.rank_i = r;
      if (r == 0) {
        c.variant.invariant_adapter = InvariantAdapter::kOff;
        c.variant.name = "V3";
      }
    }
    out.push_back({label, c});
  }
  return out;
}

}  // namespace abxi
