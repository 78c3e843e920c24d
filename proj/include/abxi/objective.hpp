#pragma once

#include <span>
#include <vector>

#include "abxi/autograd.hpp"
#include "abxi/model.hpp"
#include "abxi/rng.hpp"
#include "abxi/types.hpp"

namespace abxi {

struct CandidateSet {
  int positive = 0;
  std::vector<int> negatives;
  Domain domain = Domain::kA;
};

// Uniform sample without replacement of `n_neg` items from the contiguous
// domain range [first, last], excluding `history` (sorted) and `positive`.
// Throws DataError when the pool is too small.
CandidateSet sample_negatives(int positive, std::span<const int> history, std::pair<int, int> domain_range,
                              Domain domain, int n_neg, Rng& rng);

// Number of items available for sampling under the same exclusions.
int negative_pool_size(int positive, std::span<const int> history, std::pair<int, int> domain_range);

// -log softmax of the first candidate; scores are h.e / tau.
double info_nce(std::span<const double> h, const Matrix& candidates, double tau);
double info_nce_from_scores(std::span<const double> scores);  // already divided by tau

// Per-batch training loss: for every sequence, the mean InfoNCE over its
// supervised A positions plus the mean over its supervised B positions; then
// averaged over sequences. `candidates[r]` holds the set for flattened row r
// (only consulted where a loss mask is set).
ag::Var total_loss(const ForwardOutput& out, const Batch& batch, const ag::Var& item_table,
                   std::span<const CandidateSet> candidates, double tau);

}  // namespace abxi
