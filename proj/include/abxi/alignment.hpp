#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "abxi/types.hpp"

namespace abxi {

enum class AlignmentMode { kTask, kTimestamp };

struct CrossSequences {
  TokenSeq seq;  // merged without its last element
  TokenSeq gt;   // merged without its first element
};

CrossSequences make_cross_sequences(const TokenSeq& merged);

// gt_d[t] = gt_x[t] when gt_x[t] belongs to `d`, PAD otherwise.
TokenSeq mask_ground_truth(const TokenSeq& gt_x, Domain d);

struct AlignedSequence {
  TokenSeq seq;
  std::vector<bool> loss_mask;
};

// Places, at every position whose target lies in `d`, the most recent
// domain-d token of seq_x[0..t]. Positions without such a token stay PAD and
// are excluded from the loss.
AlignedSequence task_align(const TokenSeq& seq_x, const TokenSeq& gt_d, Domain d);

// In-place domain masking along the original timeline.
TokenSeq timestamp_align(const TokenSeq& seq_x, Domain d);

// Reverse-chronological positions over non-PAD tokens; PAD gets `max_len`.
std::vector<int> assign_positions(const TokenSeq& seq, int max_len);

struct SequenceBundle {
  TokenSeq seq_x, seq_a, seq_b;
  TokenSeq gt_x, gt_a, gt_b;
  std::vector<int> pos_x, pos_a, pos_b;
  std::vector<bool> loss_mask_a, loss_mask_b;

  int length() const { return static_cast<int>(seq_x.size()); }
  const TokenSeq& seq(Domain d) const { return d == Domain::kA ? seq_a : seq_b; }
  const std::vector<int>& pos(Domain d) const { return d == Domain::kA ? pos_a : pos_b; }
  const std::vector<bool>& loss_mask(Domain d) const {
    return d == Domain::kA ? loss_mask_a : loss_mask_b;
  }
};

// Full per-user construction from a merged chronological sequence
// (|merged| >= 2, already truncated to max_len).
SequenceBundle build_bundle(const TokenSeq& merged, int max_len, AlignmentMode mode);

// Left-pads every stream to `length`; PAD positions carry `max_len`.
SequenceBundle left_pad(const SequenceBundle& b, int length, int max_len);

nlohmann::json to_json(const SequenceBundle& b);

}  // namespace abxi
