#include "abxi/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "abxi/error.hpp"
#include "abxi/objective.hpp"
#include "abxi/rng.hpp"

namespace abxi {

std::string_view to_string(EvalMode m) { return m == EvalMode::kValidation ? "val" : "test"; }

int rank_of(double gt_score, std::span<const double> negative_scores) {
  int rank = 1;
  for (double s : negative_scores) rank += s >= gt_score ? 1 : 0;
  return rank;
}

double hr_at_k(int rank, int k) { return rank <= k ? 1.0 : 0.0; }

namespace {

// 1 / log2(r + 1) for r = 1..10, correctly rounded; std::log2 is off by one
// ulp at r = 2, 5 and 8.
constexpr double kDiscount[10] = {
    1.0,
    0.6309297535714574370995271,
    0.5,
    0.4306765580733930506701066,
    0.3868528072345415868702461,
    0.3562071871080221765141771,
    0.3333333333333333333333333,
    0.3154648767857287185497636,
    0.3010299956639811952137389,
    0.2890648263178878592662110,
};

}  // namespace

double ndcg_at_k(int rank, int k) {
  if (rank > k) return 0.0;
  return rank <= 10 ? kDiscount[rank - 1] : 1.0 / std::log2(rank + 1.0);
}

double reciprocal_rank(int rank) { return 1.0 / rank; }

std::optional<DomainMetrics> metrics_from_ranks(std::span<const int> ranks) {
  if (ranks.empty()) return std::nullopt;
  DomainMetrics m;
  for (int r : ranks) {
    m.hr5 += hr_at_k(r, 5);
    m.hr10 += hr_at_k(r, 10);
    m.ndcg10 += ndcg_at_k(r, 10);
    m.mrr += reciprocal_rank(r);
  }
  const double n = static_cast<double>(ranks.size());
  m.hr5 /= n;
  m.hr10 /= n;
  m.ndcg10 /= n;
  m.mrr /= n;
  m.evaluated = static_cast<int>(ranks.size());
  return m;
}

namespace {

struct PendingUser {
  SequenceBundle bundle;
  Domain domain;
  std::vector<int> candidates;  // gt first
};

// Scores the final position of every pending bundle; returns one rank each.
std::vector<int> rank_batch(const AbxiModel& model, std::span<const PendingUser> users) {
  std::vector<SequenceBundle> bundles;
  bundles.reserve(users.size());
  for (const auto& u : users) bundles.push_back(u.bundle);
  const Batch batch = make_batch(bundles, model.config().max_len);
  ag::NoGradGuard no_grad;
  const ForwardOutput out = model.forward(batch, ag::Context{false, nullptr});
  const Matrix& table = model.item_embeddings()->value;
  std::vector<int> ranks;
  ranks.reserve(users.size());
  std::vector<double> scores;
  for (std::size_t b = 0; b < users.size(); ++b) {
    const auto row = static_cast<Eigen::Index>(b) * batch.seq_len + batch.seq_len - 1;
    const auto h = out.rec(users[b].domain)->value.row(row);
    const auto& cands = users[b].candidates;
    scores.resize(cands.size() - 1);
    const double gt = h.dot(table.row(cands[0]));
    for (std::size_t c = 1; c < cands.size(); ++c) scores[c - 1] = h.dot(table.row(cands[c]));
    ranks.push_back(rank_of(gt, scores));
  }
  return ranks;
}

std::optional<SequenceBundle> eval_bundle(const AbxiModel& model, const TokenSeq& history, Token gt) {
  if (history.empty()) return std::nullopt;
  TokenSeq merged = history;
  merged.push_back(gt);
  SequenceBundle b = build_bundle(merged, model.config().max_len, model.config().variant.alignment);
  if (!b.loss_mask(gt.domain).back()) return std::nullopt;
  return b;
}

}  // namespace

std::optional<int> score_user(const AbxiModel& model, const TokenSeq& history, Token gt,
                              std::span<const int> negatives) {
  auto bundle = eval_bundle(model, history, gt);
  if (!bundle) return std::nullopt;
  PendingUser u{std::move(*bundle), gt.domain, {gt.item}};
  u.candidates.insert(u.candidates.end(), negatives.begin(), negatives.end());
  return rank_batch(model, std::span<const PendingUser>(&u, 1)).front();
}

EvalReport evaluate(const AbxiModel& model, const Corpus& corpus, const Split& split, EvalMode mode,
                    std::uint64_t seed, const EvalOptions& opts) {
  EvalReport report;
  report.mode = std::string(to_string(mode));
  report.seed = seed;
  report.requested_negatives = opts.n_negatives;
  report.min_negatives_used = opts.n_negatives;

  std::vector<int> ranks_a, ranks_b;
  std::vector<PendingUser> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    const auto ranks = rank_batch(model, pending);
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      (pending[i].domain == Domain::kA ? ranks_a : ranks_b).push_back(ranks[i]);
    }
    pending.clear();
  };

  const std::uint64_t mode_tag = mode == EvalMode::kValidation ? 1 : 2;
  for (std::size_t u = 0; u < split.users.size(); ++u) {
    const auto& su = split.users[u];
    const Token gt = mode == EvalMode::kValidation ? su.val_gt : su.test_gt;
    TokenSeq history = su.train;
    if (mode == EvalMode::kTest) history.push_back(su.val_gt);
    auto bundle = eval_bundle(model, history, gt);
    if (!bundle) {
      ++(gt.domain == Domain::kA ? report.skipped_a : report.skipped_b);
      continue;
    }
    const std::vector<int> seen = su.history();
    const auto range = corpus.item_range(gt.domain);
    const int pool = negative_pool_size(gt.item, seen, range);
    int n = opts.n_negatives;
    if (pool < n) {
      if (!opts.clamp_to_pool) {
        throw DataError(fmt::format("user '{}': only {} negatives available, {} requested", su.user_id, pool, n));
      }
      n = pool;
    }
    report.min_negatives_used = std::min(report.min_negatives_used, n);
    Rng rng = make_rng({seed, static_cast<std::uint64_t>(u), mode_tag, 0xe7a1ULL});
    CandidateSet cs = sample_negatives(gt.item, seen, range, gt.domain, n, rng);
    PendingUser p{std::move(*bundle), gt.domain, {gt.item}};
    p.candidates.insert(p.candidates.end(), cs.negatives.begin(), cs.negatives.end());
    pending.push_back(std::move(p));
    if (static_cast<int>(pending.size()) >= opts.batch_size) flush();
  }
  flush();
  report.a = metrics_from_ranks(ranks_a);
  report.b = metrics_from_ranks(ranks_b);
  return report;
}

namespace {

nlohmann::json metrics_json(const std::optional<DomainMetrics>& m, int skipped) {
  if (!m) return {{"evaluated", 0}, {"skipped", skipped}, {"metrics", nullptr}};
  return {{"evaluated", m->evaluated},
          {"skipped", skipped},
          {"metrics", {{"HR@5", m->hr5}, {"HR@10", m->hr10}, {"NDCG@10", m->ndcg10}, {"MRR", m->mrr}}}};
}

nlohmann::json summary_json(const MetricSummary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

nlohmann::json aggregated_json(const std::optional<AggregatedDomain>& d) {
  if (!d) return nullptr;
  return {{"HR@5", summary_json(d->hr5)},
          {"HR@10", summary_json(d->hr10)},
          {"NDCG@10", summary_json(d->ndcg10)},
          {"MRR", summary_json(d->mrr)}};
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  return {{"mode", r.mode},
          {"seed", r.seed},
          {"requested_negatives", r.requested_negatives},
          {"min_negatives_used", r.min_negatives_used},
          {"A", metrics_json(r.a, r.skipped_a)},
          {"B", metrics_json(r.b, r.skipped_b)}};
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

AggregatedReport aggregate(std::span<const EvalReport> reports) {
  AggregatedReport out;
  for (const auto& r : reports) out.seeds.push_back(r.seed);
  for (Domain d : {Domain::kA, Domain::kB}) {
    std::vector<double> hr5, hr10, ndcg, mrr;
    for (const auto& r : reports) {
      const auto& m = r.domain(d);
      if (!m) continue;
      hr5.push_back(m->hr5);
      hr10.push_back(m->hr10);
      ndcg.push_back(m->ndcg10);
      mrr.push_back(m->mrr);
    }
    if (mrr.empty()) continue;
    AggregatedDomain agg{summarize(hr5), summarize(hr10), summarize(ndcg), summarize(mrr)};
    (d == Domain::kA ? out.a : out.b) = agg;
  }
  return out;
}

nlohmann::json to_json(const AggregatedReport& r) {
  return {{"seeds", r.seeds}, {"A", aggregated_json(r.a)}, {"B", aggregated_json(r.b)}};
}

std::string format_table(std::span<const std::pair<std::string, AggregatedReport>> rows, const std::string& name_a,
                         const std::string& name_b) {
  std::size_t label_w = 7;
  for (const auto& [label, r] : rows) label_w = std::max(label_w, label.size());
  constexpr int kCell = 15;
  auto cell = [](const MetricSummary& s) { return fmt::format("{:.4f}±{:.4f}", s.mean, s.std); };
  std::string out = fmt::format("{:<{}} | {:^{}} | {:^{}}\n", "", label_w, name_a, 4 * (kCell + 1) - 1, name_b,
                                4 * (kCell + 1) - 1);
  out += fmt::format("{:<{}} |", "Variant", label_w);
  for (int d = 0; d < 2; ++d) {
    for (const char* h : {"HR@5", "HR@10", "NDCG@10", "MRR"}) out += fmt::format(" {:>{}}", h, kCell);
    out += d == 0 ? " |" : "";
  }
  out += '\n';
  for (const auto& [label, r] : rows) {
    out += fmt::format("{:<{}} |", label, label_w);
    for (const auto* dom : {&r.a, &r.b}) {
      if (*dom) {
        for (const auto* s : {&(*dom)->hr5, &(*dom)->hr10, &(*dom)->ndcg10, &(*dom)->mrr}) {
          // ± is 2 bytes in UTF-8 but one column wide.
          out += fmt::format(" {:>{}}", cell(*s), kCell + 1);
        }
      } else {
        for (int i = 0; i < 4; ++i) out += fmt::format(" {:>{}}", "-", kCell);
      }
      out += dom == &r.a ? " |" : "";
    }
    out += '\n';
  }
  return out;
}

}  // namespace abxi
