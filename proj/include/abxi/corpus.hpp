#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abxi/types.hpp"

namespace abxi {

struct Interaction {
  std::string user_id;
  std::string item_id;
  Domain domain = Domain::kA;
  std::int64_t timestamp = 0;
};

// Maps dataset category labels (e.g. "Grocery_and_Gourmet_Food") onto A/B.
// The literal labels "A" and "B" are always accepted.
using DomainMap = std::map<std::string, Domain, std::less<>>;

// Reads CSV (`user_id,item_id,domain,timestamp`, optional header) or
// JSON-lines; the format is detected from the first non-blank character.
// Malformed rows raise DataError naming the 1-based line number.
std::vector<Interaction> load_interactions(std::istream& in, const DomainMap& domains = {});
std::vector<Interaction> load_interactions_file(const std::filesystem::path& path,
                                                const DomainMap& domains = {});
void write_interactions_csv(std::ostream& out, const std::vector<Interaction>& log);

struct UserSequence {
  std::string user_id;
  TokenSeq items;                       // chronological
  std::vector<std::int64_t> timestamps;  // parallel to items

  friend bool operator==(const UserSequence&, const UserSequence&) = default;
};

// Items of domain A occupy indices [1, n_items_a], domain B the next n_items_b.
// Index 0 is PAD for both domains.
struct Corpus {
  std::vector<UserSequence> users;  // sorted by user_id
  std::vector<std::string> item_ids_a;
  std::vector<std::string> item_ids_b;

  int n_items_a() const { return static_cast<int>(item_ids_a.size()); }
  int n_items_b() const { return static_cast<int>(item_ids_b.size()); }
  int n_items() const { return n_items_a() + n_items_b(); }
  Domain domain_of(int item) const;
  const std::string& raw_item_id(int item) const;
  // Contiguous index range [first, last] of a domain.
  std::pair<int, int> item_range(Domain d) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct PreprocessOptions {
  int min_item_count = 5;
  int max_len = 50;
  // Users left with fewer interactions cannot be split leave-one-out.
  int min_user_len = 3;

  friend bool operator==(const PreprocessOptions&, const PreprocessOptions&) = default;
};

// Pipeline: keep users with both domains; stable chronological sort; drop
// items with fewer than min_item_count interactions (single pass); keep the
// latest max_len interactions; drop users that lost a domain (or fell below
// min_user_len). Throws DataError("empty corpus") if nothing survives.
Corpus preprocess(const std::vector<Interaction>& log, const PreprocessOptions& opts = {});

// Inverse of preprocess' indexing: the corpus as raw interactions.
std::vector<Interaction> to_interactions(const Corpus& corpus);

struct SplitUser {
  std::string user_id;
  TokenSeq train;
  Token val_gt;
  Token test_gt;
  // Every item the user interacted with (train, val and test).
  std::vector<int> history() const;
};

struct Split {
  std::vector<SplitUser> users;
};

Split split_leave_one_out(const Corpus& corpus);

struct CorpusStats {
  int n_users = 0;
  int n_items_a = 0, n_items_b = 0;
  int n_interactions_a = 0, n_interactions_b = 0;
  int val_gts_a = 0, val_gts_b = 0;
  int test_gts_a = 0, test_gts_b = 0;
  int a_to_b_transitions = 0, b_to_a_transitions = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);
nlohmann::json to_json(const CorpusStats& stats);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);
nlohmann::json corpus_to_json(const Corpus& corpus);
Corpus corpus_from_json(const nlohmann::json& j);

}  // namespace abxi
