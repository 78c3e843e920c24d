#include <cmath>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "abxi/ablation.hpp"
#include "abxi/error.hpp"
#include "abxi/model.hpp"
#include "../support/reference_model.hpp"

namespace abxi {
namespace {

ModelConfig tiny_config(int d = 8) {
  ModelConfig c;
  c.d = d;
  c.max_len = 6;
  c.n_heads = 2;
  c.rank_d = 2;
  c.rank_i = 2;
  c.dropout = 0.0;
  c.n_neg = 4;
  c.n_items_a = 6;
  c.n_items_b = 5;
  return c;
}

// Replaces every zero-initialised LoRA up-matrix with random values so the
// adapters actually contribute.
void activate_adapters(const AbxiModel& m, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 0.3);
  for (const auto& p : m.parameters()) {
    if (p.name.ends_with(".up")) {
      for (Eigen::Index i = 0; i < p.var->value.size(); ++i) p.var->value.data()[i] = dist(rng);
    }
  }
}

TokenSeq tokens(std::initializer_list<int> items, int n_items_a) {
  TokenSeq s;
  for (int i : items) s.push_back({i, i <= n_items_a ? Domain::kA : Domain::kB});
  return s;
}

Batch single_batch(const SequenceBundle& b, int max_len) { return make_batch(std::span(&b, 1), max_len); }

void expect_close(const Matrix& got, const reference::Mat& want, double tol) {
  ASSERT_EQ(static_cast<std::size_t>(got.rows()), want.size());
  for (Eigen::Index i = 0; i < got.rows(); ++i) {
    for (Eigen::Index j = 0; j < got.cols(); ++j) EXPECT_NEAR(got(i, j), want[i][j], tol) << i << "," << j;
  }
}

TEST(Elementwise, SwishValues) {
  EXPECT_EQ(ag::swish_value(0.0, 1.0), 0.0);
  EXPECT_NEAR(ag::swish_value(1.0, 1.0), 0.731059, 1e-6);
  EXPECT_NEAR(ag::swish_value(1.0, 1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(ModelConfig, ProjectorWidth) {
  ModelConfig c;
  EXPECT_EQ(c.resolved_proj_dim(), 680);
  EXPECT_EQ(c.resolved_ffn_dim(), 1024);
  c.d = 64;
  EXPECT_EQ(c.resolved_proj_dim(), 168);
}

TEST(ModelConfig, ValidationRejectsBadValues) {
  auto bad = [](auto mutate) {
    ModelConfig c = tiny_config();
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](ModelConfig& c) { c.rank_d = 8; });
  bad([](ModelConfig& c) { c.rank_i = -1; });
  bad([](ModelConfig& c) { c.n_heads = 3; });
  bad([](ModelConfig& c) { c.dropout = 1.0; });
  bad([](ModelConfig& c) { c.tau = 0.0; });
  bad([](ModelConfig& c) { c.n_items_a = 0; });
}

TEST(ModelConfig, JsonRoundTrip) {
  for (const auto& name : variant_names()) {
    const ModelConfig c = build_variant(name, tiny_config());
    EXPECT_EQ(model_config_from_json(to_json(c)), c) << name;
  }
}

TEST(Lora, HandExample) {
  Matrix down(1, 2), up(2, 1), x(1, 2);
  down << 1, 2;
  up << 1, 3;
  x << 1, 1;
  const LoraUnit unit(ag::parameter(down), ag::parameter(up));
  const Matrix y = unit.forward(ag::constant(x))->value;
  EXPECT_DOUBLE_EQ(y(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(y(0, 1), 9.0);
  EXPECT_TRUE(unit.forward(ag::constant(Matrix::Zero(1, 2)))->value.isZero(0.0));
}

TEST(Lora, FreshUnitIsZeroAndRankBounded) {
  ModelConfig c = tiny_config();
  for (int r : {1, 2}) {
    c.rank_i = r;
    const AbxiModel m(c, 1);
    const auto& unit = *m.invariant_lora(Domain::kA);
    Rng rng(3);
    std::normal_distribution<double> dist;
    Matrix x(4, c.d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = dist(rng);
    EXPECT_TRUE(unit.forward(ag::constant(x))->value.isZero(0.0));

    activate_adapters(m, 5);
    // Jacobian of the row map = its image of the identity basis.
    const Matrix jac = unit.forward(ag::constant(Matrix::Identity(c.d, c.d)))->value;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    EXPECT_LE(lu.rank(), r);
    EXPECT_EQ(lu.rank(), r);
  }
}

TEST(LayerNorm, RowsStandardised) {
  Rng rng(8);
  std::normal_distribution<double> dist(3.0, 5.0);
  Matrix x(7, 16);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = dist(rng);
  const Matrix y = ag::layer_norm(ag::constant(x), ag::constant(Matrix::Ones(1, 16)),
                                  ag::constant(Matrix::Zero(1, 16)), 1e-8)
                       ->value;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double mean = y.row(i).mean();
    const double var = (y.row(i).array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(Embed, PadRowsAndHandSetTables) {
  ModelConfig c = tiny_config(2);
  c.n_heads = 1;
  c.rank_d = c.rank_i = 1;
  const AbxiModel m(c, 2);
  m.item_embeddings()->value.row(1) << 1.0, 2.0;
  m.position_embeddings()->value.row(0) << 10.0, 20.0;
  const ag::Context eval;
  const std::vector<int> items{1, 0}, pos{0, c.max_len};
  const Matrix e = m.embed(items, pos, eval)->value;
  EXPECT_EQ(e(0, 0), 11.0);
  EXPECT_EQ(e(0, 1), 22.0);
  const Matrix pad = m.item_embeddings()->value.row(0) + m.position_embeddings()->value.row(c.max_len);
  EXPECT_EQ(e.row(1), pad.row(0));
  EXPECT_EQ(m.embed(items, pos, eval)->value, e);
  EXPECT_THROW(m.embed(items, std::vector<int>{0}, eval), DataError);
}

TEST(ZeroInit, EncodeIndependentOfTag) {
  const ModelConfig c = tiny_config();
  const AbxiModel m(c, 7);
  const SequenceBundle b = build_bundle(tokens({1, 7, 2, 8, 3, 9}, c.n_items_a), c.max_len, AlignmentMode::kTask);
  const Batch batch = single_batch(b, c.max_len);
  const ag::Context eval;
  const ag::Var e = m.embed(batch.items[0], batch.positions[0], eval);
  const auto layout = batch.layout(SeqTag::kX);
  const Matrix hx = m.encode(e, layout, SeqTag::kX, eval)->value;
  EXPECT_EQ(m.encode(e, layout, SeqTag::kA, eval)->value, hx);
  EXPECT_EQ(m.encode(e, layout, SeqTag::kB, eval)->value, hx);
  const ag::Var h = ag::constant(hx);
  EXPECT_EQ(m.project_invariant(h, Domain::kA, eval)->value, m.project_invariant(h, Domain::kB, eval)->value);
}

TEST(ZeroInit, AbxiMatchesV1AndV3AtInit) {
  const ModelConfig c = tiny_config();
  const SequenceBundle b = build_bundle(tokens({1, 7, 2, 8, 3, 9}, c.n_items_a), c.max_len, AlignmentMode::kTask);
  const Batch batch = single_batch(b, c.max_len);
  const AbxiModel abxi(c, 3);
  for (const char* name : {"V1", "V3"}) {
    const AbxiModel other(build_variant(name, c), 3);
    // Copy the shared parameters so only the adapters differ.
    for (const auto& p : other.parameters()) p.var->value = (*abxi.find_parameter(p.name))->value;
    const auto x = abxi.forward(batch, {});
    const auto y = other.forward(batch, {});
    EXPECT_EQ(x.rec_a->value, y.rec_a->value) << name;
    EXPECT_EQ(x.rec_b->value, y.rec_b->value) << name;
  }
}

TEST(Projector, ZeroWeightsReduceToLayerNorm) {
  const ModelConfig c = tiny_config();
  const AbxiModel m(c, 4);
  (*m.find_parameter("proj_a.w3"))->value.setZero();
  Rng rng(1);
  std::normal_distribution<double> dist;
  Matrix h(3, c.d);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = dist(rng);
  const Matrix got = m.project_specific(ag::constant(h), Domain::kA, {})->value;
  const Matrix want =
      ag::layer_norm(ag::constant(h), ag::constant(Matrix::Ones(1, c.d)), ag::constant(Matrix::Zero(1, c.d)), c.ln_eps)
          ->value;
  EXPECT_TRUE(got.isApprox(want, 1e-14));
}

TEST(Fuse, AdditiveIdentities) {
  Matrix a(2, 2), b(2, 2);
  a << 1.5, -2, 0.25, 4;
  b << 0.5, 1, -1, 2;
  EXPECT_EQ(AbxiModel::fuse(ag::constant(a), ag::constant(Matrix::Zero(2, 2)))->value, a);
  EXPECT_TRUE(AbxiModel::fuse(ag::constant(a), ag::constant(Matrix(-a)))->value.isZero(0.0));
  Matrix sum(2, 2);
  sum << 2, -1, -0.75, 6;
  EXPECT_EQ(AbxiModel::fuse(ag::constant(a), ag::constant(b))->value, sum);
  EXPECT_THROW(AbxiModel::fuse(ag::constant(a), ag::constant(Matrix::Zero(1, 2))), DataError);
}

TEST(Forward, MatchesReferenceForEveryVariant) {
  for (const auto& name : variant_names()) {
    const ModelConfig c = build_variant(name, tiny_config());
    const AbxiModel m(c, 11);
    activate_adapters(m, 12);
    const SequenceBundle b =
        build_bundle(tokens({1, 7, 8, 2, 9, 3}, c.n_items_a), c.max_len, c.variant.alignment);
    const auto out = m.forward(single_batch(b, c.max_len), {});
    const auto ref = reference::forward(m, b);
    SCOPED_TRACE(name);
    expect_close(out.rec_a->value, ref.rec_a, 1e-11);
    expect_close(out.rec_b->value, ref.rec_b, 1e-11);
  }
}

TEST(Forward, MatchesReferenceWithHandSetTwoDimensionalWeights) {
  ModelConfig c = tiny_config(2);
  c.n_heads = 1;
  c.rank_d = c.rank_i = 1;
  const AbxiModel m(c, 0);
  int k = 0;
  for (const auto& p : m.parameters()) {
    for (Eigen::Index i = 0; i < p.var->value.size(); ++i) p.var->value.data()[i] = 0.5 * std::sin(1.0 + k++);
  }
  const SequenceBundle b = build_bundle(tokens({1, 8}, c.n_items_a), c.max_len, AlignmentMode::kTask);
  ASSERT_EQ(b.length(), 1);
  const SequenceBundle b3 = build_bundle(tokens({2, 8, 3}, c.n_items_a), c.max_len, AlignmentMode::kTask);
  for (const auto* bundle : {&b, &b3}) {
    const auto out = m.forward(single_batch(*bundle, c.max_len), {});
    const auto ref = reference::forward(m, *bundle);
    expect_close(out.rec_a->value, ref.rec_a, 1e-12);
    expect_close(out.rec_b->value, ref.rec_b, 1e-12);
  }
}

TEST(Forward, LeftPaddingDoesNotChangeRealRows) {
  const ModelConfig c = tiny_config();
  const AbxiModel m(c, 21);
  activate_adapters(m, 22);
  const SequenceBundle shorter = build_bundle(tokens({1, 7, 2}, c.n_items_a), c.max_len, AlignmentMode::kTask);
  const SequenceBundle longer =
      build_bundle(tokens({1, 7, 8, 2, 9, 3}, c.n_items_a), c.max_len, AlignmentMode::kTask);
  const std::vector<SequenceBundle> both{longer, shorter};
  const Batch batch = make_batch(both, c.max_len);
  const auto out = m.forward(batch, {});
  const auto alone = m.forward(single_batch(shorter, c.max_len), {});
  const int T = batch.seq_len, t = shorter.length();
  for (int r = 0; r < t; ++r) {
    EXPECT_TRUE(out.rec_a->value.row(T + T - t + r).isApprox(alone.rec_a->value.row(r), 1e-12));
    EXPECT_TRUE(out.rec_b->value.row(T + T - t + r).isApprox(alone.rec_b->value.row(r), 1e-12));
  }
}

TEST(Forward, EvalModeDeterministicTrainingModeStochastic) {
  ModelConfig c = tiny_config();
  c.dropout = 0.3;
  const AbxiModel m(c, 9);
  const SequenceBundle b = build_bundle(tokens({1, 7, 8, 2, 9, 3}, c.n_items_a), c.max_len, AlignmentMode::kTask);
  const Batch batch = single_batch(b, c.max_len);
  EXPECT_EQ(m.forward(batch, {}).rec_a->value, m.forward(batch, {}).rec_a->value);
  Rng r1(1), r2(1), r3(2);
  const Matrix t1 = m.forward(batch, {true, &r1}).rec_a->value;
  EXPECT_EQ(m.forward(batch, {true, &r2}).rec_a->value, t1);
  EXPECT_NE(m.forward(batch, {true, &r3}).rec_a->value, t1);
}

TEST(FlopCount, AttentionQuadraticInLength) {
  ModelConfig c = tiny_config();
  c.max_len = 50;
  const AbxiModel m(c, 1);
  const auto f10 = m.flop_count(10), f20 = m.flop_count(20);
  EXPECT_EQ(f20.attention_scores, 4 * f10.attention_scores);
  EXPECT_EQ(f20.dense, 2 * f10.dense);
}

TEST(Parameters, NamesUniqueAndCountConsistent) {
  for (const auto& name : variant_names()) {
    const AbxiModel m(build_variant(name, tiny_config()), 1);
    std::set<std::string> seen;
    std::int64_t total = 0;
    for (const auto& p : m.parameters()) {
      EXPECT_TRUE(seen.insert(p.name).second) << p.name;
      total += p.var->value.size();
    }
    EXPECT_EQ(total, m.parameter_count());
  }
}

}  // namespace
}  // namespace abxi
