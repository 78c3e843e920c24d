#include "abxi/alignment.hpp"

#include <fmt/format.h>

#include "abxi/error.hpp"

namespace abxi {

CrossSequences make_cross_sequences(const TokenSeq& merged) {
  if (merged.size() < 2) {
    throw DataError(fmt::format("cross sequence needs at least 2 tokens, got {}", merged.size()));
  }
  return {TokenSeq(merged.begin(), merged.end() - 1), TokenSeq(merged.begin() + 1, merged.end())};
}

TokenSeq mask_ground_truth(const TokenSeq& gt_x, Domain d) {
  TokenSeq out(gt_x.size(), kPadToken);
  for (std::size_t t = 0; t < gt_x.size(); ++t) {
    if (gt_x[t].domain == d) out[t] = gt_x[t];
  }
  return out;
}

AlignedSequence task_align(const TokenSeq& seq_x, const TokenSeq& gt_d, Domain d) {
  if (seq_x.size() != gt_d.size()) {
    throw DataError(fmt::format("task_align: sequence length {} != target length {}", seq_x.size(),
                                gt_d.size()));
  }
  AlignedSequence out{TokenSeq(seq_x.size(), kPadToken), std::vector<bool>(seq_x.size(), false)};
  Token latest = kPadToken;
  for (std::size_t t = 0; t < seq_x.size(); ++t) {
    if (seq_x[t].domain == d) latest = seq_x[t];
    if (gt_d[t].is_pad()) continue;
    out.seq[t] = latest;
    out.loss_mask[t] = !latest.is_pad();
  }
  return out;
}

TokenSeq timestamp_align(const TokenSeq& seq_x, Domain d) {
  TokenSeq out(seq_x.size(), kPadToken);
  for (std::size_t t = 0; t < seq_x.size(); ++t) {
    if (seq_x[t].domain == d) out[t] = seq_x[t];
  }
  return out;
}

std::vector<int> assign_positions(const TokenSeq& seq, int max_len) {
  std::vector<int> pos(seq.size(), max_len);
  int next = 0;
  for (std::size_t i = seq.size(); i-- > 0;) {
    if (!seq[i].is_pad()) pos[i] = next++;
  }
  return pos;
}

namespace {

// Supervised iff the target is in `d` and some domain-d token precedes it.
std::vector<bool> timestamp_loss_mask(const TokenSeq& seq_x, const TokenSeq& gt_x, Domain d) {
  std::vector<bool> mask(seq_x.size(), false);
  bool seen = false;
  for (std::size_t t = 0; t < seq_x.size(); ++t) {
    seen = seen || seq_x[t].domain == d;
    mask[t] = seen && gt_x[t].domain == d;
  }
  return mask;
}

}  // namespace

SequenceBundle build_bundle(const TokenSeq& merged, int max_len, AlignmentMode mode) {
  if (static_cast<int>(merged.size()) > max_len) {
    throw DataError(fmt::format("merged sequence of length {} exceeds max_len {}", merged.size(), max_len));
  }
  auto cross = make_cross_sequences(merged);
  SequenceBundle b;
  b.seq_x = std::move(cross.seq);
  b.gt_x = std::move(cross.gt);
  b.gt_a = mask_ground_truth(b.gt_x, Domain::kA);
  b.gt_b = mask_ground_truth(b.gt_x, Domain::kB);
  if (mode == AlignmentMode::kTask) {
    auto a = task_align(b.seq_x, b.gt_a, Domain::kA);
    auto bb = task_align(b.seq_x, b.gt_b, Domain::kB);
    b.seq_a = std::move(a.seq);
    b.loss_mask_a = std::move(a.loss_mask);
    b.seq_b = std::move(bb.seq);
    b.loss_mask_b = std::move(bb.loss_mask);
  } else {
    b.seq_a = timestamp_align(b.seq_x, Domain::kA);
    b.seq_b = timestamp_align(b.seq_x, Domain::kB);
    b.loss_mask_a = timestamp_loss_mask(b.seq_x, b.gt_x, Domain::kA);
    b.loss_mask_b = timestamp_loss_mask(b.seq_x, b.gt_x, Domain::kB);
  }
  b.pos_x = assign_positions(b.seq_x, max_len);
  b.pos_a = assign_positions(b.seq_a, max_len);
  b.pos_b = assign_positions(b.seq_b, max_len);
  return b;
}

SequenceBundle left_pad(const SequenceBundle& b, int length, int max_len) {
  const int n = b.length();
  if (length < n) throw DataError(fmt::format("cannot left-pad length {} to {}", n, length));
  const std::size_t pad = static_cast<std::size_t>(length - n);
  auto tokens = [&](const TokenSeq& s) {
    TokenSeq out(pad, kPadToken);
    out.insert(out.end(), s.begin(), s.end());
    return out;
  };
  auto ints = [&](const std::vector<int>& s) {
    std::vector<int> out(pad, max_len);
    out.insert(out.end(), s.begin(), s.end());
    return out;
  };
  auto bools = [&](const std::vector<bool>& s) {
    std::vector<bool> out(pad, false);
    out.insert(out.end(), s.begin(), s.end());
    return out;
  };
  SequenceBundle o;
  o.seq_x = tokens(b.seq_x);
  o.seq_a = tokens(b.seq_a);
  o.seq_b = tokens(b.seq_b);
  o.gt_x = tokens(b.gt_x);
  o.gt_a = tokens(b.gt_a);
  o.gt_b = tokens(b.gt_b);
  o.pos_x = ints(b.pos_x);
  o.pos_a = ints(b.pos_a);
  o.pos_b = ints(b.pos_b);
  o.loss_mask_a = bools(b.loss_mask_a);
  o.loss_mask_b = bools(b.loss_mask_b);
  return o;
}

nlohmann::json to_json(const SequenceBundle& b) {
  auto tokens = [](const TokenSeq& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : s) {
      arr.push_back(t.is_pad() ? nlohmann::json("PAD")
                               : nlohmann::json(fmt::format("{}{}", domain_name(t.domain), t.item)));
    }
    return arr;
  };
  return {{"seq_x", tokens(b.seq_x)},  {"seq_a", tokens(b.seq_a)},  {"seq_b", tokens(b.seq_b)},
          {"gt_x", tokens(b.gt_x)},    {"gt_a", tokens(b.gt_a)},    {"gt_b", tokens(b.gt_b)},
          {"pos_x", b.pos_x},          {"pos_a", b.pos_a},          {"pos_b", b.pos_b},
          {"loss_mask_a", b.loss_mask_a}, {"loss_mask_b", b.loss_mask_b}};
}

}  // namespace abxi
