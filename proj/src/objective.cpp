#include "abxi/objective.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "abxi/error.hpp"

namespace abxi {
namespace {

bool excluded(int item, int positive, std::span<const int> history) {
  return item == positive || std::binary_search(history.begin(), history.end(), item);
}

}  // namespace

int negative_pool_size(int positive, std::span<const int> history, std::pair<int, int> domain_range) {
  const auto [first, last] = domain_range;
  int n = last - first + 1;
  bool positive_counted = false;
  for (int h : history) {
    if (h >= first && h <= last) {
      --n;
      positive_counted = positive_counted || h == positive;
    }
  }
  if (!positive_counted && positive >= first && positive <= last) --n;
  return std::max(n, 0);
}

CandidateSet sample_negatives(int positive, std::span<const int> history, std::pair<int, int> domain_range,
                              Domain domain, int n_neg, Rng& rng) {
  const int pool = negative_pool_size(positive, history, domain_range);
  if (pool < n_neg) {
    throw DataError(fmt::format("negative pool has {} items, {} requested", pool, n_neg));
  }
  const auto [first, last] = domain_range;
  CandidateSet out{positive, {}, domain};
  out.negatives.reserve(static_cast<std::size_t>(n_neg));
  if (pool >= 2 * n_neg) {
    // Rejection sampling stays cheap while the pool dominates the request.
    std::uniform_int_distribution<int> pick(first, last);
    std::unordered_set<int> chosen;
    while (static_cast<int>(out.negatives.size()) < n_neg) {
      const int c = pick(rng);
      if (excluded(c, positive, history) || !chosen.insert(c).second) continue;
      out.negatives.push_back(c);
    }
  } else {
    std::vector<int> candidates;
    candidates.reserve(static_cast<std::size_t>(pool));
    for (int c = first; c <= last; ++c) {
      if (!excluded(c, positive, history)) candidates.push_back(c);
    }
    for (int i = 0; i < n_neg; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(candidates.size()) - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
      out.negatives.push_back(candidates[i]);
    }
  }
  return out;
}

double info_nce_from_scores(std::span<const double> scores) {
  if (scores.empty()) throw DataError("info_nce: no candidates");
  double mx = -INFINITY;
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericalError("info_nce: non-finite score");
    mx = std::max(mx, s);
  }
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  return mx + std::log(z) - scores[0];
}

double info_nce(std::span<const double> h, const Matrix& candidates, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  if (static_cast<Eigen::Index>(h.size()) != candidates.cols()) {
    throw DataError("info_nce: representation/candidate width mismatch");
  }
  for (double v : h) {
    if (!std::isfinite(v)) throw NumericalError("info_nce: non-finite representation");
  }
  Eigen::Map<const RowVector> hv(h.data(), static_cast<Eigen::Index>(h.size()));
  std::vector<double> scores(static_cast<std::size_t>(candidates.rows()));
  for (Eigen::Index c = 0; c < candidates.rows(); ++c) scores[c] = hv.dot(candidates.row(c)) / tau;
  return info_nce_from_scores(scores);
}

ag::Var total_loss(const ForwardOutput& out, const Batch& batch, const ag::Var& item_table,
                   std::span<const CandidateSet> candidates, double tau) {
  std::vector<ag::Var> parts;
  const int T = batch.seq_len;
  for (Domain d : {Domain::kA, Domain::kB}) {
    const auto& mask = batch.loss_mask(d);
    std::vector<ag::InfoNceTarget> targets;
    for (int b = 0; b < batch.size; ++b) {
      int count = 0;
      for (int t = 0; t < T; ++t) count += mask[b * T + t] ? 1 : 0;
      if (count == 0) continue;  // empty domain contributes 0
      const double w = 1.0 / (count * static_cast<double>(batch.size));
      for (int t = 0; t < T; ++t) {
        const int r = b * T + t;
        if (!mask[r]) continue;
        if (static_cast<std::size_t>(r) >= candidates.size()) throw DataError("total_loss: missing candidate set");
        const auto& cs = candidates[r];
        if (cs.positive != batch.target_items[r]) {
          throw DataError(fmt::format("total_loss: candidate positive {} != target {}", cs.positive,
                                      batch.target_items[r]));
        }
        ag::InfoNceTarget target{r, {cs.positive}, w};
        target.candidates.insert(target.candidates.end(), cs.negatives.begin(), cs.negatives.end());
        targets.push_back(std::move(target));
      }
    }
    if (!targets.empty()) parts.push_back(ag::info_nce(out.rec(d), item_table, targets, tau));
  }
  if (parts.empty()) return ag::constant(Matrix::Zero(1, 1));
  return ag::sum(parts);
}

}  // namespace abxi
