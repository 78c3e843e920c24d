#include "abxi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "abxi/error.hpp"
#include "abxi/objective.hpp"
#include "abxi/optimizer.hpp"
#include "abxi/rng.hpp"

namespace abxi {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(lr > 0.0)) fail("lr must be positive");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (max_epochs < 1) fail("max_epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= max_epochs) fail("warmup_epochs must lie in [0, max_epochs)");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) fail("lr_decay_factor must lie in (0, 1)");
  if (plateau_epochs < 1 || early_stop_patience < 1) fail("plateau/patience must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (eval_negatives < 1) fail("eval_negatives must be >= 1");
  if (seeds.empty()) fail("at least one seed is required");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"max_epochs", c.max_epochs},
          {"warmup_epochs", c.warmup_epochs},
          {"lr_decay_factor", c.lr_decay_factor},
          {"plateau_epochs", c.plateau_epochs},
          {"early_stop_patience", c.early_stop_patience},
          {"batch_size", c.batch_size},
          {"eval_negatives", c.eval_negatives},
          {"seeds", c.seeds},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("lr", c.lr);
    get("weight_decay", c.weight_decay);
    get("max_epochs", c.max_epochs);
    get("warmup_epochs", c.warmup_epochs);
    get("lr_decay_factor", c.lr_decay_factor);
    get("plateau_epochs", c.plateau_epochs);
    get("early_stop_patience", c.early_stop_patience);
    get("batch_size", c.batch_size);
    get("eval_negatives", c.eval_negatives);
    get("seeds", c.seeds);
    get("adam_beta1", c.adam_beta1);
    get("adam_beta2", c.adam_beta2);
    get("adam_eps", c.adam_eps);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const EpochRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"val_mrr_a", opt(r.val_mrr_a)},
          {"val_mrr_b", opt(r.val_mrr_b)},
          {"lr", r.lr}};
}

ModelConfig bind_to_corpus(ModelConfig base, const Corpus& corpus) {
  base.n_items_a = corpus.n_items_a();
  base.n_items_b = corpus.n_items_b();
  return base;
}

namespace {

struct Example {
  std::uint64_t user = 0;  // index into the split
  SequenceBundle bundle;
  std::vector<int> history;  // sorted, whole filtered sequence
};

std::vector<Example> build_examples(const Split& split, const ModelConfig& mc) {
  std::vector<Example> out;
  for (std::size_t u = 0; u < split.users.size(); ++u) {
    const auto& su = split.users[u];
    if (su.train.size() < 2) continue;
    SequenceBundle b = build_bundle(su.train, mc.max_len, mc.variant.alignment);
    const bool any = std::ranges::any_of(b.loss_mask_a, std::identity{}) ||
                     std::ranges::any_of(b.loss_mask_b, std::identity{});
    if (!any) continue;
    out.push_back({static_cast<std::uint64_t>(u), std::move(b), su.history()});
  }
  return out;
}

// One candidate set per supervised row; each user draws from its own stream
// so the sample does not depend on batch composition.
std::vector<CandidateSet> sample_batch_candidates(const Batch& batch, std::span<const Example* const> examples,
                                                  const Corpus& corpus, int n_neg, std::uint64_t seed, int epoch) {
  std::vector<CandidateSet> out(static_cast<std::size_t>(batch.size) * batch.seq_len);
  for (int b = 0; b < batch.size; ++b) {
    const Example& ex = *examples[b];
    Rng rng = make_rng({seed, ex.user, static_cast<std::uint64_t>(epoch), 0x5a3eULL});
    for (int t = 0; t < batch.seq_len; ++t) {
      const int r = b * batch.seq_len + t;
      if (!batch.loss_mask_a[r] && !batch.loss_mask_b[r]) continue;
      const int target = batch.target_items[r];
      const Domain d = corpus.domain_of(target);
      out[r] = sample_negatives(target, ex.history, corpus.item_range(d), d, n_neg, rng);
    }
  }
  return out;
}

std::vector<Matrix> snapshot(const AbxiModel& model) {
  std::vector<Matrix> s;
  for (const auto& p : model.parameters()) s.push_back(p.var->value);
  return s;
}

void restore(const AbxiModel& model, const std::vector<Matrix>& s) {
  for (std::size_t i = 0; i < s.size(); ++i) model.parameters()[i].var->value = s[i];
}

}  // namespace

double evaluate_training_loss(const AbxiModel& model, const Corpus& corpus, const Split& split,
                              std::uint64_t seed, int epoch, int batch_size) {
  const auto examples = build_examples(split, model.config());
  ag::NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(examples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Example*> ptrs;
    std::vector<SequenceBundle> bundles;
    for (std::size_t i = start; i < end; ++i) {
      ptrs.push_back(&examples[i]);
      bundles.push_back(examples[i].bundle);
    }
    const Batch batch = make_batch(bundles, model.config().max_len);
    const auto cands = sample_batch_candidates(batch, ptrs, corpus, model.config().n_neg, seed, epoch);
    const auto out = model.forward(batch, ag::Context{false, nullptr});
    total += total_loss(out, batch, model.item_embeddings(), cands, model.config().tau)->value(0, 0) *
             static_cast<double>(end - start);
  }
  return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

TrainResult train(const Corpus& corpus, const Split& split, const ModelConfig& model_config,
                  const TrainConfig& tc, std::uint64_t seed, const EpochCallback& on_epoch) {
  tc.validate();
  const ModelConfig mc = bind_to_corpus(model_config, corpus);
  TrainResult result;
  result.model = std::make_unique<AbxiModel>(mc, seed);
  AbxiModel& model = *result.model;

  const auto examples = build_examples(split, mc);
  if (examples.empty()) throw DataError("no user has a supervised training position");

  AdamW opt(model.parameters(), {tc.adam_beta1, tc.adam_beta2, tc.adam_eps, tc.weight_decay});
  LrSchedule schedule(tc.lr, tc.warmup_epochs, tc.lr_decay_factor, tc.plateau_epochs, tc.early_stop_patience);
  std::vector<Matrix> best = snapshot(model);
  EvalOptions eval_opts;
  eval_opts.n_negatives = tc.eval_negatives;

  std::vector<std::size_t> order(examples.size());
  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    const double lr = schedule.lr(epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = make_rng({seed, static_cast<std::uint64_t>(epoch), 0x5f1eULL});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batch_idx = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size), ++batch_idx) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::vector<const Example*> ptrs;
      std::vector<SequenceBundle> bundles;
      for (std::size_t i = start; i < end; ++i) {
        ptrs.push_back(&examples[order[i]]);
        bundles.push_back(examples[order[i]].bundle);
      }
      const Batch batch = make_batch(bundles, mc.max_len);
      const auto cands = sample_batch_candidates(batch, ptrs, corpus, mc.n_neg, seed, epoch);
      Rng dropout_rng = make_rng({seed, static_cast<std::uint64_t>(epoch), batch_idx, 0xd0ULL});
      const auto out = model.forward(batch, ag::Context{true, &dropout_rng});
      ag::Var loss = total_loss(out, batch, model.item_embeddings(), cands, mc.tau);
      const double value = loss->value(0, 0);
      if (!std::isfinite(value)) {
        throw NumericalError(fmt::format("non-finite training loss at epoch {} batch {}", epoch, batch_idx));
      }
      opt.zero_grad();
      ag::backward(loss);
      opt.step(lr);
      loss_sum += value * static_cast<double>(end - start);
    }

    const EvalReport val = evaluate(model, corpus, split, EvalMode::kValidation, seed, eval_opts);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (val.a) rec.val_mrr_a = val.a->mrr;
    if (val.b) rec.val_mrr_b = val.b->mrr;
    rec.lr = lr;
    if (schedule.record(val.mrr_sum())) {
      best = snapshot(model);
      result.best_epoch = epoch;
      result.best_val_mrr_sum = val.mrr_sum();
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (schedule.should_stop()) {
      result.early_stopped = true;
      break;
    }
  }
  restore(model, best);
  return result;
}

SweepResult run_seed_sweep(const Corpus& corpus, const Split& split, const ModelConfig& model_config,
                           const TrainConfig& tc, const EpochCallback& on_epoch) {
  tc.validate();
  SweepResult sweep;
  std::vector<EvalReport> reports;
  EvalOptions eval_opts;
  eval_opts.n_negatives = tc.eval_negatives;
  for (std::uint64_t seed : tc.seeds) {
    SeedRun run;
    run.seed = seed;
    run.result = train(corpus, split, model_config, tc, seed, on_epoch);
    run.test = evaluate(*run.result.model, corpus, split, EvalMode::kTest, seed, eval_opts);
    reports.push_back(run.test);
    sweep.runs.push_back(std::move(run));
  }
  sweep.aggregated = aggregate(reports);
  return sweep;
}

}  // namespace abxi
