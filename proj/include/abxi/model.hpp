#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abxi/alignment.hpp"
#include "abxi/autograd.hpp"
#include "abxi/types.hpp"

namespace abxi {

// How the encoder is specialised per sequence.
enum class DomainAdapter { kLora, kOff, kThreeEncoders, kThreeProjectors };
// How invariant interests are adapted to each target domain.
enum class InvariantAdapter { kLora, kOff, kThreeProjectors, kTwoProjectors };

struct VariantFlags {
  std::string name = "ABXI";
  AlignmentMode alignment = AlignmentMode::kTask;
  DomainAdapter domain_adapter = DomainAdapter::kLora;
  InvariantAdapter invariant_adapter = InvariantAdapter::kLora;
  bool projectors = true;

  friend bool operator==(const VariantFlags&, const VariantFlags&) = default;
};

struct ModelConfig {
  int d = 256;
  int max_len = 50;  // L; also the PAD position index
  int n_heads = 2;
  int n_layers = 1;
  int ffn_dim = 0;   // j; 0 -> 4d
  int proj_dim = 0;  // g; 0 -> (8/3)d rounded to a multiple of 8
  int rank_d = 64;
  int rank_i = 64;
  double dropout = 0.3;
  double swish_beta = 1.0;
  double tau = 0.75;
  int n_neg = 128;
  bool single_proj_dropout = false;
  double ln_eps = 1e-8;
  double init_std = 0.02;
  int n_items_a = 0;
  int n_items_b = 0;
  VariantFlags variant;

  int n_items() const { return n_items_a + n_items_b; }
  int resolved_ffn_dim() const { return ffn_dim > 0 ? ffn_dim : 4 * d; }
  int resolved_proj_dim() const;
  void validate() const;  // throws ConfigError

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
std::string_view to_string(DomainAdapter m);
std::string_view to_string(InvariantAdapter m);
std::string_view to_string(AlignmentMode m);

enum class SeqTag { kX = 0, kA = 1, kB = 2 };
inline SeqTag tag_of(Domain d) { return d == Domain::kA ? SeqTag::kA : SeqTag::kB; }

struct NamedParameter {
  std::string name;
  ag::Var var;
};

// Y = X * down^T * up^T; down is r x d, up is d x r.
class LoraUnit {
 public:
  LoraUnit(ag::Var down, ag::Var up) : down_(std::move(down)), up_(std::move(up)) {}
  ag::Var forward(const ag::Var& x) const;
  int rank() const { return static_cast<int>(down_->value.rows()); }
  const ag::Var& down() const { return down_; }
  const ag::Var& up() const { return up_; }

 private:
  ag::Var down_, up_;
};

// SwishGLU MLP: Drop((Swish(X W1) * X W2) W3).
class Projector {
 public:
  Projector(ag::Var w1, ag::Var w2, ag::Var w3, double beta)
      : w1_(std::move(w1)), w2_(std::move(w2)), w3_(std::move(w3)), beta_(beta) {}
  ag::Var forward(const ag::Var& x, double dropout, const ag::Context& ctx) const;

 private:
  ag::Var w1_, w2_, w3_;
  double beta_;
};

struct LayerNormParams {
  ag::Var gain, bias;
};

struct EncoderLayer {
  ag::Var wq, bq, wk, bk, wv, bv, wo, bo;
  ag::Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  LayerNormParams ln_attn, ln_ffn;
  // Indexed by SeqTag; empty when the variant has no per-sequence adapter.
  std::array<std::optional<LoraUnit>, 3> lora;
  std::array<std::optional<Projector>, 3> dense;
};

// One encoder = a stack of layers; ABXI uses a single shared encoder.
struct Encoder {
  std::vector<EncoderLayer> layers;
};

// Row-stacked inputs of `size` left-padded bundles of `seq_len` tokens.
struct Batch {
  int size = 0;
  int seq_len = 0;
  std::array<std::vector<int>, 3> items;      // by SeqTag
  std::array<std::vector<int>, 3> positions;  // by SeqTag
  std::vector<int> target_items;              // gt_x, flattened
  std::vector<bool> loss_mask_a, loss_mask_b;

  const std::vector<bool>& loss_mask(Domain d) const { return d == Domain::kA ? loss_mask_a : loss_mask_b; }
  ag::AttentionLayout layout(SeqTag tag) const;
};

Batch make_batch(std::span<const SequenceBundle> bundles, int max_len);

struct ForwardOutput {
  ag::Var rec_a, rec_b;
  const ag::Var& rec(Domain d) const { return d == Domain::kA ? rec_a : rec_b; }
};

// Forward computation of the recommender. Parameters are read-only during
// forward; the trainer mutates them between steps.
class AbxiModel {
 public:
  AbxiModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::int64_t parameter_count() const;
  const ag::Var* find_parameter(const std::string& name) const;

  const ag::Var& item_embeddings() const { return item_emb_; }
  const ag::Var& position_embeddings() const { return pos_emb_; }

  ag::Var embed(std::span<const int> items, std::span<const int> positions, const ag::Context& ctx) const;
  ag::Var encode(const ag::Var& embedded, const ag::AttentionLayout& layout, SeqTag tag,
                 const ag::Context& ctx) const;
  ag::Var project_specific(const ag::Var& h_enc, Domain d, const ag::Context& ctx) const;
  ag::Var project_invariant(const ag::Var& h_x_enc, Domain target, const ag::Context& ctx) const;
  static ag::Var fuse(const ag::Var& specific, const ag::Var& invariant);
  ForwardOutput forward(const Batch& batch, const ag::Context& ctx) const;

  // Component access for tests and tooling.
  const Encoder& encoder(SeqTag tag) const;
  const std::optional<LoraUnit>& invariant_lora(Domain d) const { return ilora_[d == Domain::kA ? 0 : 1]; }
  const std::optional<Projector>& specific_projector(Domain d) const { return proj_[d == Domain::kA ? 0 : 1]; }
  const std::optional<Projector>& invariant_projector() const { return proj_i_; }

  // Approximate multiply-accumulate count of one forward pass over a single
  // sequence of length `seq_len`, split by component.
  struct FlopCount {
    std::int64_t attention_scores = 0;  // QK^T and PV
    std::int64_t dense = 0;             // projections, FFN, adapters, projectors
  };
  FlopCount flop_count(int seq_len) const;

 private:
  ag::Var new_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, double std_dev);
  ag::Var new_const_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);
  LayerNormParams new_layer_norm(const std::string& name);
  LoraUnit new_lora(const std::string& name, int rank);
  Projector new_projector(const std::string& name);
  Encoder new_encoder(const std::string& name, bool with_adapters);
  ag::Var layer_norm(const ag::Var& x, const LayerNormParams& p) const;
  ag::Var project_invariant_from(const ag::Var& h_x_enc, const ag::Var& proj_i_out, Domain target,
                                 const ag::Context& ctx) const;

  ModelConfig config_;
  Rng init_rng_;
  std::vector<NamedParameter> params_;

  ag::Var item_emb_, pos_emb_;
  std::vector<Encoder> encoders_;  // 1 shared, or 3 (X, A, B)
  std::array<std::optional<Projector>, 2> proj_;  // A, B
  std::optional<Projector> proj_i_;
  std::array<std::optional<LoraUnit>, 2> ilora_;
  std::array<std::optional<Projector>, 2> x2d_proj_;
  std::array<LayerNormParams, 2> ln_specific_, ln_invariant_;
};

}  // namespace abxi
