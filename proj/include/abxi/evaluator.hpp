#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abxi/corpus.hpp"
#include "abxi/model.hpp"

namespace abxi {

enum class EvalMode { kValidation, kTest };
std::string_view to_string(EvalMode m);

// 1 + number of candidates scoring >= the ground truth (ties count against it).
int rank_of(double gt_score, std::span<const double> negative_scores);

double hr_at_k(int rank, int k);
double ndcg_at_k(int rank, int k);
double reciprocal_rank(int rank);

struct DomainMetrics {
  double hr5 = 0.0, hr10 = 0.0, ndcg10 = 0.0, mrr = 0.0;
  int evaluated = 0;
};

// Mean metrics over a list of ranks (empty list -> nullopt).
std::optional<DomainMetrics> metrics_from_ranks(std::span<const int> ranks);

struct EvalReport {
  std::string mode;
  std::uint64_t seed = 0;
  int requested_negatives = 0;
  std::optional<DomainMetrics> a, b;  // absent when a domain has no GT
  int skipped_a = 0, skipped_b = 0;   // GTs without in-domain history
  int min_negatives_used = 0;         // smallest candidate pool actually ranked against

  const std::optional<DomainMetrics>& domain(Domain d) const { return d == Domain::kA ? a : b; }
  double mrr_sum() const { return (a ? a->mrr : 0.0) + (b ? b->mrr : 0.0); }
};

struct EvalOptions {
  int n_negatives = 999;
  int batch_size = 256;
  // Rank against the whole remaining domain when it is smaller than
  // n_negatives instead of failing.
  bool clamp_to_pool = true;
};

// Scores `candidates` (gt first) for one user whose conditioning history is
// `history`; returns nullopt when the GT domain has no prior in-domain token.
std::optional<int> score_user(const AbxiModel& model, const TokenSeq& history, Token gt,
                              std::span<const int> negatives);

EvalReport evaluate(const AbxiModel& model, const Corpus& corpus, const Split& split, EvalMode mode,
                    std::uint64_t seed, const EvalOptions& opts = {});

nlohmann::json to_json(const EvalReport& r);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for one value
};
MetricSummary summarize(std::span<const double> values);

struct AggregatedDomain {
  MetricSummary hr5, hr10, ndcg10, mrr;
};

struct AggregatedReport {
  std::vector<std::uint64_t> seeds;
  std::optional<AggregatedDomain> a, b;
};

AggregatedReport aggregate(std::span<const EvalReport> reports);
nlohmann::json to_json(const AggregatedReport& r);
// Aligned text table: one row per label, HR@5 HR@10 NDCG@10 MRR per domain.
std::string format_table(std::span<const std::pair<std::string, AggregatedReport>> rows,
                         const std::string& name_a = "A", const std::string& name_b = "B");

}  // namespace abxi
