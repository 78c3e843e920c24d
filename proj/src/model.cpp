#include "abxi/model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "abxi/error.hpp"

namespace abxi {

using ag::Var;

int ModelConfig::resolved_proj_dim() const {
  if (proj_dim > 0) return proj_dim;
  const double raw = 8.0 * d / 3.0;
  const int g = static_cast<int>(std::lround(raw / 8.0)) * 8;
  return g > 0 ? g : 8;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (d <= 0) fail("d must be positive");
  if (n_heads <= 0 || d % n_heads != 0) fail(fmt::format("d={} is not divisible by n_heads={}", d, n_heads));
  if (max_len < 2) fail("max_len must be >= 2");
  if (n_layers < 1) fail("n_layers must be >= 1");
  if (ffn_dim < 0 || proj_dim < 0) fail("ffn_dim/proj_dim must be >= 0");
  if (rank_d < 0 || rank_d >= d) fail(fmt::format("rank_d={} must satisfy 0 <= r < d={}", rank_d, d));
  if (rank_i < 0 || rank_i >= d) fail(fmt::format("rank_i={} must satisfy 0 <= r < d={}", rank_i, d));
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (n_neg < 1) fail("n_neg must be >= 1");
  if (!(ln_eps > 0.0)) fail("ln_eps must be positive");
  if (n_items_a < 1 || n_items_b < 1) fail("both domains need at least one item");
  const auto ia = variant.invariant_adapter;
  if (!variant.projectors &&
      (ia == InvariantAdapter::kThreeProjectors || ia == InvariantAdapter::kTwoProjectors)) {
    fail("projector-based invariant adapters need projectors enabled");
  }
}

std::string_view to_string(DomainAdapter m) {
  switch (m) {
    case DomainAdapter::kLora: return "lora";
    case DomainAdapter::kOff: return "off";
    case DomainAdapter::kThreeEncoders: return "three_encoders";
    case DomainAdapter::kThreeProjectors: return "three_projectors";
  }
  return "?";
}

std::string_view to_string(InvariantAdapter m) {
  switch (m) {
    case InvariantAdapter::kLora: return "lora";
    case InvariantAdapter::kOff: return "off";
    case InvariantAdapter::kThreeProjectors: return "three_projectors";
    case InvariantAdapter::kTwoProjectors: return "two_projectors";
  }
  return "?";
}

std::string_view to_string(AlignmentMode m) { return m == AlignmentMode::kTask ? "task" : "timestamp"; }

namespace {

template <typename E>
E enum_from(const std::string& s, std::initializer_list<E> options, const char* what) {
  for (E e : options) {
    if (to_string(e) == s) return e;
  }
  throw ConfigError(fmt::format("unknown {} '{}'", what, s));
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"d", c.d},
          {"max_len", c.max_len},
          {"n_heads", c.n_heads},
          {"n_layers", c.n_layers},
          {"ffn_dim", c.ffn_dim},
          {"proj_dim", c.proj_dim},
          {"rank_d", c.rank_d},
          {"rank_i", c.rank_i},
          {"dropout", c.dropout},
          {"swish_beta", c.swish_beta},
          {"tau", c.tau},
          {"n_neg", c.n_neg},
          {"single_proj_dropout", c.single_proj_dropout},
          {"ln_eps", c.ln_eps},
          {"init_std", c.init_std},
          {"n_items_a", c.n_items_a},
          {"n_items_b", c.n_items_b},
          {"variant",
           {{"name", c.variant.name},
            {"alignment", to_string(c.variant.alignment)},
            {"domain_adapter", to_string(c.variant.domain_adapter)},
            {"invariant_adapter", to_string(c.variant.invariant_adapter)},
            {"projectors", c.variant.projectors}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d", c.d);
    get("max_len", c.max_len);
    get("n_heads", c.n_heads);
    get("n_layers", c.n_layers);
    get("ffn_dim", c.ffn_dim);
    get("proj_dim", c.proj_dim);
    get("rank_d", c.rank_d);
    get("rank_i", c.rank_i);
    get("dropout", c.dropout);
    get("swish_beta", c.swish_beta);
    get("tau", c.tau);
    get("n_neg", c.n_neg);
    get("single_proj_dropout", c.single_proj_dropout);
    get("ln_eps", c.ln_eps);
    get("init_std", c.init_std);
    get("n_items_a", c.n_items_a);
    get("n_items_b", c.n_items_b);
    if (j.contains("variant")) {
      const auto& v = j.at("variant");
      if (v.contains("name")) c.variant.name = v.at("name").get<std::string>();
      if (v.contains("alignment")) {
        c.variant.alignment = enum_from(v.at("alignment").get<std::string>(),
                                        {AlignmentMode::kTask, AlignmentMode::kTimestamp}, "alignment");
      }
      if (v.contains("domain_adapter")) {
        c.variant.domain_adapter = enum_from(
            v.at("domain_adapter").get<std::string>(),
            {DomainAdapter::kLora, DomainAdapter::kOff, DomainAdapter::kThreeEncoders,
             DomainAdapter::kThreeProjectors},
            "domain adapter");
      }
      if (v.contains("invariant_adapter")) {
        c.variant.invariant_adapter = enum_from(
            v.at("invariant_adapter").get<std::string>(),
            {InvariantAdapter::kLora, InvariantAdapter::kOff, InvariantAdapter::kThreeProjectors,
             InvariantAdapter::kTwoProjectors},
            "invariant adapter");
      }
      if (v.contains("projectors")) c.variant.projectors = v.at("projectors").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  return c;
}

ag::AttentionLayout Batch::layout(SeqTag tag) const {
  ag::AttentionLayout l;
  l.batch = size;
  l.seq_len = seq_len;
  const auto& it = items[static_cast<int>(tag)];
  l.key_valid.resize(it.size());
  for (std::size_t i = 0; i < it.size(); ++i) l.key_valid[i] = it[i] != kPadItem;
  return l;
}

Batch make_batch(std::span<const SequenceBundle> bundles, int max_len) {
  Batch b;
  b.size = static_cast<int>(bundles.size());
  for (const auto& x : bundles) b.seq_len = std::max(b.seq_len, x.length());
  for (const auto& raw : bundles) {
    const SequenceBundle p = left_pad(raw, b.seq_len, max_len);
    const std::array<const TokenSeq*, 3> seqs{&p.seq_x, &p.seq_a, &p.seq_b};
    const std::array<const std::vector<int>*, 3> pos{&p.pos_x, &p.pos_a, &p.pos_b};
    for (int s = 0; s < 3; ++s) {
      for (const auto& t : *seqs[s]) b.items[s].push_back(t.item);
      b.positions[s].insert(b.positions[s].end(), pos[s]->begin(), pos[s]->end());
    }
    for (const auto& t : p.gt_x) b.target_items.push_back(t.item);
    b.loss_mask_a.insert(b.loss_mask_a.end(), p.loss_mask_a.begin(), p.loss_mask_a.end());
    b.loss_mask_b.insert(b.loss_mask_b.end(), p.loss_mask_b.begin(), p.loss_mask_b.end());
  }
  return b;
}

Var LoraUnit::forward(const Var& x) const { return ag::matmul_nt(ag::matmul_nt(x, down_), up_); }

Var Projector::forward(const Var& x, double dropout, const ag::Context& ctx) const {
  Var gate = ag::swish(ag::matmul(x, w1_), beta_);
  Var hidden = ag::hadamard(gate, ag::matmul(x, w2_));
  return ag::dropout(ag::matmul(hidden, w3_), dropout, ctx);
}

AbxiModel::AbxiModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), init_rng_(derive_seed({seed, 0x1a17ULL})) {
  config_.validate();
  const int d = config_.d;
  const double s = config_.init_std;
  const auto& v = config_.variant;

  item_emb_ = new_param("item_embedding", config_.n_items() + 1, d, s);
  pos_emb_ = new_param("position_embedding", config_.max_len + 1, d, s);

  if (v.domain_adapter == DomainAdapter::kThreeEncoders) {
    encoders_.push_back(new_encoder("encoder_x", false));
    encoders_.push_back(new_encoder("encoder_a", false));
    encoders_.push_back(new_encoder("encoder_b", false));
  } else {
    encoders_.push_back(new_encoder("encoder", true));
  }

  if (v.projectors) {
    proj_[0] = new_projector("proj_a");
    proj_[1] = new_projector("proj_b");
    if (v.invariant_adapter != InvariantAdapter::kTwoProjectors) proj_i_ = new_projector("proj_i");
  }
  switch (v.invariant_adapter) {
    case InvariantAdapter::kLora:
      if (config_.rank_i > 0) {
        ilora_[0] = new_lora("ilora_a", config_.rank_i);
        ilora_[1] = new_lora("ilora_b", config_.rank_i);
      }
      break;
    case InvariantAdapter::kThreeProjectors:
    case InvariantAdapter::kTwoProjectors:
      x2d_proj_[0] = new_projector("proj_x2a");
      x2d_proj_[1] = new_projector("proj_x2b");
      break;
    case InvariantAdapter::kOff:
      break;
  }
  ln_specific_[0] = new_layer_norm("ln_p_a");
  ln_specific_[1] = new_layer_norm("ln_p_b");
  ln_invariant_[0] = new_layer_norm("ln_i2a");
  ln_invariant_[1] = new_layer_norm("ln_i2b");
}

Var AbxiModel::new_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, double std_dev) {
  Matrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, std_dev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(init_rng_);
  Var p = ag::parameter(std::move(m));
  params_.push_back({name, p});
  return p;
}

Var AbxiModel::new_const_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
  Var p = ag::parameter(Matrix::Constant(rows, cols, value));
  params_.push_back({name, p});
  return p;
}

LayerNormParams AbxiModel::new_layer_norm(const std::string& name) {
  return {new_const_param(name + ".gain", 1, config_.d, 1.0), new_const_param(name + ".bias", 1, config_.d, 0.0)};
}

LoraUnit AbxiModel::new_lora(const std::string& name, int rank) {
  Var down = new_param(name + ".down", rank, config_.d, config_.init_std);
  Var up = new_const_param(name + ".up", config_.d, rank, 0.0);
  return {down, up};
}

Projector AbxiModel::new_projector(const std::string& name) {
  const int d = config_.d, g = config_.resolved_proj_dim();
  Var w1 = new_param(name + ".w1", d, g, config_.init_std);
  Var w2 = new_param(name + ".w2", d, g, config_.init_std);
  Var w3 = new_param(name + ".w3", g, d, config_.init_std);
  return {w1, w2, w3, config_.swish_beta};
}

Encoder AbxiModel::new_encoder(const std::string& name, bool with_adapters) {
  const int d = config_.d, j = config_.resolved_ffn_dim();
  const double s = config_.init_std;
  Encoder enc;
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = fmt::format("{}.{}.", name, l);
    EncoderLayer layer;
    layer.wq = new_param(p + "attn.wq", d, d, s);
    layer.bq = new_const_param(p + "attn.bq", 1, d, 0.0);
    layer.wk = new_param(p + "attn.wk", d, d, s);
    layer.bk = new_const_param(p + "attn.bk", 1, d, 0.0);
    layer.wv = new_param(p + "attn.wv", d, d, s);
    layer.bv = new_const_param(p + "attn.bv", 1, d, 0.0);
    layer.wo = new_param(p + "attn.wo", d, d, s);
    layer.bo = new_const_param(p + "attn.bo", 1, d, 0.0);
    layer.ffn_w1 = new_param(p + "ffn.w1", d, j, s);
    layer.ffn_b1 = new_const_param(p + "ffn.b1", 1, j, 0.0);
    layer.ffn_w2 = new_param(p + "ffn.w2", j, d, s);
    layer.ffn_b2 = new_const_param(p + "ffn.b2", 1, d, 0.0);
    layer.ln_attn = new_layer_norm(p + "ln_attn");
    layer.ln_ffn = new_layer_norm(p + "ln_ffn");
    if (with_adapters) {
      static constexpr std::array<const char*, 3> kTags{"x", "a", "b"};
      for (int t = 0; t < 3; ++t) {
        if (config_.variant.domain_adapter == DomainAdapter::kLora && config_.rank_d > 0) {
          layer.lora[t] = new_lora(p + "dlora_" + kTags[t], config_.rank_d);
        } else if (config_.variant.domain_adapter == DomainAdapter::kThreeProjectors) {
          layer.dense[t] = new_projector(p + "dproj_" + kTags[t]);
        }
      }
    }
    enc.layers.push_back(std::move(layer));
  }
  return enc;
}

std::int64_t AbxiModel::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.var->value.size();
  return n;
}

const Var* AbxiModel::find_parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.var;
  }
  return nullptr;
}

const Encoder& AbxiModel::encoder(SeqTag tag) const {
  return encoders_.size() == 1 ? encoders_[0] : encoders_[static_cast<int>(tag)];
}

Var AbxiModel::layer_norm(const Var& x, const LayerNormParams& p) const {
  return ag::layer_norm(x, p.gain, p.bias, config_.ln_eps);
}

Var AbxiModel::embed(std::span<const int> items, std::span<const int> positions, const ag::Context& ctx) const {
  if (items.size() != positions.size()) throw DataError("embed: items/positions length mismatch");
  Var e = ag::add(ag::gather_rows(item_emb_, items), ag::gather_rows(pos_emb_, positions));
  return ag::dropout(e, config_.dropout, ctx);
}

Var AbxiModel::encode(const Var& embedded, const ag::AttentionLayout& layout, SeqTag tag,
                      const ag::Context& ctx) const {
  const double p = config_.dropout;
  const double inner = config_.single_proj_dropout ? 0.0 : p;
  Var x = embedded;
  for (const auto& layer : encoder(tag).layers) {
    Var q = ag::linear(x, layer.wq, layer.bq);
    Var k = ag::linear(x, layer.wk, layer.bk);
    Var v = ag::linear(x, layer.wv, layer.bv);
    Var attn = ag::linear(ag::causal_attention(q, k, v, layout, config_.n_heads), layer.wo, layer.bo);
    Var h = layer_norm(ag::add(x, ag::dropout(attn, p, ctx)), layer.ln_attn);

    Var ffn = ag::linear(ag::gelu(ag::linear(h, layer.ffn_w1, layer.ffn_b1)), layer.ffn_w2, layer.ffn_b2);
    std::vector<Var> terms{h, ag::dropout(ffn, p, ctx)};
    const int t = static_cast<int>(tag);
    if (layer.lora[t]) terms.push_back(ag::dropout(layer.lora[t]->forward(h), p, ctx));
    if (layer.dense[t]) terms.push_back(ag::dropout(layer.dense[t]->forward(h, inner, ctx), p, ctx));
    x = layer_norm(ag::sum(terms), layer.ln_ffn);
  }
  return x;
}

Var AbxiModel::project_specific(const Var& h_enc, Domain d, const ag::Context& ctx) const {
  const int i = d == Domain::kA ? 0 : 1;
  if (!proj_[i]) return layer_norm(h_enc, ln_specific_[i]);
  const double inner = config_.single_proj_dropout ? 0.0 : config_.dropout;
  Var delta = ag::dropout(proj_[i]->forward(h_enc, inner, ctx), config_.dropout, ctx);
  return layer_norm(ag::add(h_enc, delta), ln_specific_[i]);
}

Var AbxiModel::project_invariant(const Var& h_x_enc, Domain target, const ag::Context& ctx) const {
  const double inner = config_.single_proj_dropout ? 0.0 : config_.dropout;
  Var shared = proj_i_ ? proj_i_->forward(h_x_enc, inner, ctx) : nullptr;
  return project_invariant_from(h_x_enc, shared, target, ctx);
}

Var AbxiModel::project_invariant_from(const Var& h_x_enc, const Var& proj_i_out, Domain target,
                                      const ag::Context& ctx) const {
  const int i = target == Domain::kA ? 0 : 1;
  const double p = config_.dropout;
  const double inner = config_.single_proj_dropout ? 0.0 : p;
  std::vector<Var> terms{h_x_enc};
  if (proj_i_out) terms.push_back(ag::dropout(proj_i_out, p, ctx));
  if (ilora_[i]) terms.push_back(ag::dropout(ilora_[i]->forward(h_x_enc), p, ctx));
  if (x2d_proj_[i]) terms.push_back(ag::dropout(x2d_proj_[i]->forward(h_x_enc, inner, ctx), p, ctx));
  return layer_norm(ag::sum(terms), ln_invariant_[i]);
}

Var AbxiModel::fuse(const Var& specific, const Var& invariant) {
  const auto& a = specific->value;
  const auto& b = invariant->value;
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError(fmt::format("fuse: shape mismatch {}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
  }
  return ag::add(specific, invariant);
}

ForwardOutput AbxiModel::forward(const Batch& batch, const ag::Context& ctx) const {
  std::array<Var, 3> enc;
  for (int t = 0; t < 3; ++t) {
    const auto tag = static_cast<SeqTag>(t);
    Var e = embed(batch.items[t], batch.positions[t], ctx);
    enc[t] = encode(e, batch.layout(tag), tag, ctx);
  }
  const Var& h_x = enc[0];
  const double inner = config_.single_proj_dropout ? 0.0 : config_.dropout;
  Var shared = proj_i_ ? proj_i_->forward(h_x, inner, ctx) : nullptr;
  ForwardOutput out;
  for (Domain d : {Domain::kA, Domain::kB}) {
    Var spec = project_specific(enc[static_cast<int>(tag_of(d))], d, ctx);
    Var inv = project_invariant_from(h_x, shared, d, ctx);
    (d == Domain::kA ? out.rec_a : out.rec_b) = fuse(spec, inv);
  }
  return out;
}

AbxiModel::FlopCount AbxiModel::flop_count(int seq_len) const {
  const std::int64_t T = seq_len, d = config_.d, j = config_.resolved_ffn_dim();
  const std::int64_t g = config_.resolved_proj_dim();
  FlopCount f;
  for (int t = 0; t < 3; ++t) {
    for (const auto& layer : encoder(static_cast<SeqTag>(t)).layers) {
      f.attention_scores += 2 * T * T * d;
      f.dense += 4 * T * d * d + 2 * T * d * j;
      if (layer.lora[t]) f.dense += 2 * T * d * layer.lora[t]->rank();
      if (layer.dense[t]) f.dense += 3 * T * d * g;
    }
  }
  auto proj_cost = [&](bool present) { return present ? 3 * T * d * g : 0; };
  f.dense += proj_cost(proj_[0].has_value()) + proj_cost(proj_[1].has_value()) + proj_cost(proj_i_.has_value());
  f.dense += proj_cost(x2d_proj_[0].has_value()) + proj_cost(x2d_proj_[1].has_value());
  for (const auto& l : ilora_) {
    if (l) f.dense += 2 * T * d * l->rank();
  }
  return f;
}

}  // namespace abxi
