#include "abxi/synthetic.hpp"

#include <fmt/format.h>

#include "abxi/error.hpp"
#include "abxi/rng.hpp"

namespace abxi {

SyntheticProfile parse_profile(const std::string& s) {
  if (s == "shared-interest") return SyntheticProfile::kSharedInterest;
  if (s == "mismatch-heavy") return SyntheticProfile::kMismatchHeavy;
  if (s == "random") return SyntheticProfile::kRandom;
  throw ConfigError(fmt::format("unknown synthetic profile '{}'", s));
}

std::string_view to_string(SyntheticProfile p) {
  switch (p) {
    case SyntheticProfile::kSharedInterest: return "shared-interest";
    case SyntheticProfile::kMismatchHeavy: return "mismatch-heavy";
    case SyntheticProfile::kRandom: return "random";
  }
  return "?";
}

int shared_interest_next(int last_local, int items_per_domain) {
  const int clusters = items_per_domain / kSlots;
  const int slot = last_local % kSlots;  // == latent interest
  const int cluster = last_local / kSlots;
  return ((cluster + 1 + slot) % clusters) * kSlots + slot;
}

int mismatch_chain_next(int prev_local, int items_per_domain) {
  // Affine map with a multiplier coprime to typical sizes; a fixed
  // permutation-like successor per item.
  return static_cast<int>((static_cast<std::int64_t>(prev_local) * 37 + 11) % items_per_domain);
}

std::string synthetic_item_id(Domain d, int local) {
  return fmt::format("{}{:04d}", d == Domain::kA ? 'a' : 'b', local);
}

std::vector<Interaction> generate_synthetic(const SyntheticOptions& o) {
  if (o.n_users < 1) throw ConfigError("n_users must be >= 1");
  if (o.min_len < 3 || o.max_len < o.min_len) throw ConfigError("need 3 <= min_len <= max_len");
  if (o.items_per_domain < 2) throw ConfigError("items_per_domain must be >= 2");
  if (o.profile == SyntheticProfile::kSharedInterest && o.items_per_domain % kSlots != 0) {
    throw ConfigError(fmt::format("shared-interest needs items_per_domain divisible by {}", kSlots));
  }
  Rng rng = make_rng({o.seed, 0x5e7ULL, static_cast<std::uint64_t>(o.profile)});
  std::uniform_int_distribution<int> len_dist(o.min_len, o.max_len);
  std::uniform_int_distribution<int> item_dist(0, o.items_per_domain - 1);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution noisy(o.noise);

  std::vector<Interaction> log;
  for (int u = 0; u < o.n_users; ++u) {
    const std::string uid = fmt::format("u{:06d}", u);
    const int len = len_dist(rng);
    std::vector<Domain> domains(static_cast<std::size_t>(len));
    std::vector<int> local(static_cast<std::size_t>(len));

    if (o.profile == SyntheticProfile::kMismatchHeavy) {
      const Domain first = coin(rng) ? Domain::kA : Domain::kB;
      int prev[2] = {-1, -1};
      for (int t = 0; t < len; ++t) {
        const Domain d = t % 2 == 0 ? first : other_domain(first);
        int& p = prev[static_cast<int>(d)];
        const int item = (p < 0 || noisy(rng)) ? item_dist(rng) : mismatch_chain_next(p, o.items_per_domain);
        domains[t] = d;
        local[t] = p = item;
      }
    } else {
      for (int t = 0; t < len; ++t) domains[t] = coin(rng) ? Domain::kA : Domain::kB;
      bool has_a = false, has_b = false;
      for (Domain d : domains) (d == Domain::kA ? has_a : has_b) = true;
      if (!has_a || !has_b) {
        std::uniform_int_distribution<int> pos(0, len - 1);
        auto& flip = domains[static_cast<std::size_t>(pos(rng))];
        flip = other_domain(flip);
      }
      if (o.profile == SyntheticProfile::kRandom) {
        for (int t = 0; t < len; ++t) local[t] = item_dist(rng);
      } else {
        std::uniform_int_distribution<int> latent_dist(0, kSlots - 1);
        std::uniform_int_distribution<int> cluster_dist(0, o.items_per_domain / kSlots - 1);
        const int latent = latent_dist(rng);
        local[0] = cluster_dist(rng) * kSlots + latent;
        for (int t = 1; t < len; ++t) local[t] = shared_interest_next(local[t - 1], o.items_per_domain);
      }
    }
    for (int t = 0; t < len; ++t) {
      log.push_back({uid, synthetic_item_id(domains[t], local[t]), domains[t],
                     1'600'000'000LL + static_cast<std::int64_t>(u) * 10'000 + t * 60});
    }
  }
  return log;
}

}  // namespace abxi
