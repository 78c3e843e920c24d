#include "abxi/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "abxi/error.hpp"

namespace abxi {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// RFC 4180-style split of a single line: quoted fields may contain commas
// and doubled quotes. Embedded newlines are not supported.
bool split_csv_line(std::string_view line, std::vector<std::string>& fields) {
  fields.clear();
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::string(trim(cur)));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) return false;
  fields.push_back(std::string(trim(cur)));
  return true;
}

Domain resolve_domain(std::string_view label, const DomainMap& domains, std::size_t line_no) {
  if (auto it = domains.find(label); it != domains.end()) return it->second;
  if (label == "A") return Domain::kA;
  if (label == "B") return Domain::kB;
  throw DataError(fmt::format("line {}: unknown domain label '{}'", line_no, label));
}

std::int64_t parse_timestamp(std::string_view s, std::size_t line_no) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw DataError(fmt::format("line {}: malformed timestamp '{}'", line_no, s));
  }
  if (v < 0) throw DataError(fmt::format("line {}: negative timestamp {}", line_no, v));
  return v;
}

Interaction parse_json_line(std::string_view line, const DomainMap& domains, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("line {}: invalid JSON ({})", line_no, e.what()));
  }
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(name)) {
      throw DataError(fmt::format("line {}: missing field '{}'", line_no, name));
    }
    return j.at(name);
  };
  auto as_id = [&](const nlohmann::json& v, const char* name) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw DataError(fmt::format("line {}: field '{}' must be a string or integer", line_no, name));
  };
  Interaction rec;
  rec.user_id = as_id(field("user_id"), "user_id");
  rec.item_id = as_id(field("item_id"), "item_id");
  const auto& dom = field("domain");
  if (!dom.is_string()) throw DataError(fmt::format("line {}: field 'domain' must be a string", line_no));
  rec.domain = resolve_domain(dom.get<std::string>(), domains, line_no);
  const auto& ts = field("timestamp");
  if (ts.is_number_integer()) {
    rec.timestamp = ts.get<std::int64_t>();
    if (rec.timestamp < 0) throw DataError(fmt::format("line {}: negative timestamp", line_no));
  } else if (ts.is_string()) {
    rec.timestamp = parse_timestamp(ts.get<std::string>(), line_no);
  } else {
    throw DataError(fmt::format("line {}: field 'timestamp' must be an integer", line_no));
  }
  return rec;
}

}  // namespace

std::vector<Interaction> load_interactions(std::istream& in, const DomainMap& domains) {
  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  enum class Format { kUnknown, kCsv, kJsonl } format = Format::kUnknown;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    if (format == Format::kUnknown) {
      format = body.front() == '{' ? Format::kJsonl : Format::kCsv;
      if (format == Format::kCsv && body.starts_with("user_id")) continue;  // header
    }
    if (format == Format::kJsonl) {
      out.push_back(parse_json_line(body, domains, line_no));
      continue;
    }
    if (!split_csv_line(body, fields)) {
      throw DataError(fmt::format("line {}: unterminated quoted field", line_no));
    }
    if (fields.size() != 4) {
      throw DataError(fmt::format("line {}: expected 4 fields, got {}", line_no, fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw DataError(fmt::format("line {}: empty user_id or item_id", line_no));
    }
    Interaction rec;
    rec.user_id = fields[0];
    rec.item_id = fields[1];
    rec.domain = resolve_domain(fields[2], domains, line_no);
    rec.timestamp = parse_timestamp(fields[3], line_no);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<Interaction> load_interactions_file(const std::filesystem::path& path,
                                                const DomainMap& domains) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open input file '{}'", path.string()));
  return load_interactions(in, domains);
}

void write_interactions_csv(std::ostream& out, const std::vector<Interaction>& log) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  };
  out << "user_id,item_id,domain,timestamp\n";
  for (const auto& r : log) {
    out << quote(r.user_id) << ',' << quote(r.item_id) << ',' << domain_name(r.domain) << ','
        << r.timestamp << '\n';
  }
}

Domain Corpus::domain_of(int item) const {
  if (item <= 0 || item > n_items()) return Domain::kPad;
  return item <= n_items_a() ? Domain::kA : Domain::kB;
}

const std::string& Corpus::raw_item_id(int item) const {
  if (item <= 0 || item > n_items()) {
    throw DataError(fmt::format("item index {} out of range", item));
  }
  return item <= n_items_a() ? item_ids_a[item - 1] : item_ids_b[item - n_items_a() - 1];
}

std::pair<int, int> Corpus::item_range(Domain d) const {
  if (d == Domain::kA) return {1, n_items_a()};
  return {n_items_a() + 1, n_items()};
}

Corpus preprocess(const std::vector<Interaction>& log, const PreprocessOptions& opts) {
  if (opts.min_item_count < 1) throw ConfigError("min_item_count must be >= 1");
  if (opts.max_len < 2) throw ConfigError("max_len must be >= 2");

  // Records are referenced by their index in `log`; ascending index order is
  // input order, which breaks timestamp ties.
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < log.size(); ++i) by_user[log[i].user_id].push_back(i);

  auto has_both = [&](const std::vector<std::size_t>& rows) {
    bool a = false, b = false;
    for (auto r : rows) (log[r].domain == Domain::kA ? a : b) = true;
    return a && b;
  };

  // (1) overlap filter, (2) chronological sort.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> users;
  for (auto& [uid, rows] : by_user) {
    if (!has_both(rows)) continue;
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t x, std::size_t y) { return log[x].timestamp < log[y].timestamp; });
    users.emplace_back(uid, std::move(rows));
  }

  // (3) single-pass item frequency filter among retained users.
  using ItemKey = std::pair<Domain, std::string>;
  std::map<ItemKey, int> counts;
  for (const auto& [uid, rows] : users) {
    for (auto r : rows) ++counts[{log[r].domain, log[r].item_id}];
  }
  for (auto& [uid, rows] : users) {
    std::erase_if(rows, [&](std::size_t r) {
      return counts[{log[r].domain, log[r].item_id}] < opts.min_item_count;
    });
    // (4) keep the latest max_len interactions.
    if (static_cast<int>(rows.size()) > opts.max_len) {
      rows.erase(rows.begin(), rows.end() - opts.max_len);
    }
  }
  // (5) secondary user filter.
  std::erase_if(users, [&](const auto& u) {
    return !has_both(u.second) || static_cast<int>(u.second.size()) < opts.min_user_len;
  });
  if (users.empty()) throw DataError("empty corpus: no users survive preprocessing");

  Corpus corpus;
  std::set<std::string> items_a, items_b;
  for (const auto& [uid, rows] : users) {
    for (auto r : rows) (log[r].domain == Domain::kA ? items_a : items_b).insert(log[r].item_id);
  }
  corpus.item_ids_a.assign(items_a.begin(), items_a.end());
  corpus.item_ids_b.assign(items_b.begin(), items_b.end());
  std::unordered_map<std::string, int> index_a, index_b;
  for (int i = 0; i < corpus.n_items_a(); ++i) index_a[corpus.item_ids_a[i]] = i + 1;
  for (int i = 0; i < corpus.n_items_b(); ++i) {
    index_b[corpus.item_ids_b[i]] = corpus.n_items_a() + i + 1;
  }

  corpus.users.reserve(users.size());
  for (const auto& [uid, rows] : users) {  // already sorted by user id (std::map order)
    UserSequence seq;
    seq.user_id = uid;
    for (auto r : rows) {
      const auto& rec = log[r];
      const int idx = rec.domain == Domain::kA ? index_a.at(rec.item_id) : index_b.at(rec.item_id);
      seq.items.push_back({idx, rec.domain});
      seq.timestamps.push_back(rec.timestamp);
    }
    corpus.users.push_back(std::move(seq));
  }
  return corpus;
}

std::vector<Interaction> to_interactions(const Corpus& corpus) {
  std::vector<Interaction> out;
  for (const auto& u : corpus.users) {
    for (std::size_t t = 0; t < u.items.size(); ++t) {
      out.push_back({u.user_id, corpus.raw_item_id(u.items[t].item), u.items[t].domain, u.timestamps[t]});
    }
  }
  return out;
}

std::vector<int> SplitUser::history() const {
  std::vector<int> h;
  h.reserve(train.size() + 2);
  for (const auto& t : train) h.push_back(t.item);
  h.push_back(val_gt.item);
  h.push_back(test_gt.item);
  std::sort(h.begin(), h.end());
  h.erase(std::unique(h.begin(), h.end()), h.end());
  return h;
}

Split split_leave_one_out(const Corpus& corpus) {
  Split split;
  split.users.reserve(corpus.users.size());
  for (const auto& u : corpus.users) {
    const auto n = u.items.size();
    if (n < 3) {
      throw DataError(fmt::format("user '{}' has {} interactions; leave-one-out needs at least 3",
                                  u.user_id, n));
    }
    SplitUser su;
    su.user_id = u.user_id;
    su.train.assign(u.items.begin(), u.items.end() - 2);
    su.val_gt = u.items[n - 2];
    su.test_gt = u.items[n - 1];
    split.users.push_back(std::move(su));
  }
  return split;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.n_users = static_cast<int>(corpus.users.size());
  s.n_items_a = corpus.n_items_a();
  s.n_items_b = corpus.n_items_b();
  for (const auto& u : corpus.users) {
    for (std::size_t t = 0; t < u.items.size(); ++t) {
      const Domain d = u.items[t].domain;
      ++(d == Domain::kA ? s.n_interactions_a : s.n_interactions_b);
      if (t > 0 && u.items[t - 1].domain != d) {
        ++(d == Domain::kB ? s.a_to_b_transitions : s.b_to_a_transitions);
      }
    }
    const auto n = u.items.size();
    if (n >= 2) ++(u.items[n - 2].domain == Domain::kA ? s.val_gts_a : s.val_gts_b);
    if (n >= 1) ++(u.items[n - 1].domain == Domain::kA ? s.test_gts_a : s.test_gts_b);
  }
  return s;
}

nlohmann::json to_json(const CorpusStats& s) {
  return {
      {"users", s.n_users},
      {"A", {{"items", s.n_items_a}, {"interactions", s.n_interactions_a}, {"val_gts", s.val_gts_a},
             {"test_gts", s.test_gts_a}, {"a_to_b_transitions", s.a_to_b_transitions}}},
      {"B", {{"items", s.n_items_b}, {"interactions", s.n_interactions_b}, {"val_gts", s.val_gts_b},
             {"test_gts", s.test_gts_b}, {"b_to_a_transitions", s.b_to_a_transitions}}},
  };
}

nlohmann::json corpus_to_json(const Corpus& corpus) {
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : corpus.users) {
    std::vector<int> items;
    for (const auto& t : u.items) items.push_back(t.item);
    users.push_back({{"user_id", u.user_id}, {"items", items}, {"timestamps", u.timestamps}});
  }
  return {{"format", "abxi-corpus"},
          {"version", 1},
          {"items_a", corpus.item_ids_a},
          {"items_b", corpus.item_ids_b},
          {"users", users}};
}

Corpus corpus_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "abxi-corpus") throw DataError("not an abxi corpus file");
    Corpus c;
    c.item_ids_a = j.at("items_a").get<std::vector<std::string>>();
    c.item_ids_b = j.at("items_b").get<std::vector<std::string>>();
    for (const auto& ju : j.at("users")) {
      UserSequence u;
      u.user_id = ju.at("user_id").get<std::string>();
      for (int idx : ju.at("items").get<std::vector<int>>()) {
        const Domain d = c.domain_of(idx);
        if (d == Domain::kPad) throw DataError(fmt::format("item index {} out of range", idx));
        u.items.push_back({idx, d});
      }
      u.timestamps = ju.at("timestamps").get<std::vector<std::int64_t>>();
      if (u.timestamps.size() != u.items.size()) throw DataError("items/timestamps length mismatch");
      c.users.push_back(std::move(u));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed corpus file: ") + e.what());
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << corpus_to_json(corpus).dump() << '\n';
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open corpus file '{}'", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed corpus file: ") + e.what());
  }
  return corpus_from_json(j);
}

}  // namespace abxi
