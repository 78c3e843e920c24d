#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "abxi/corpus.hpp"
#include "abxi/evaluator.hpp"
#include "abxi/model.hpp"

namespace abxi {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  int max_epochs = 500;
  int warmup_epochs = 5;
  double lr_decay_factor = 0.3162;
  int plateau_epochs = 30;
  int early_stop_patience = 60;
  int batch_size = 128;
  int eval_negatives = 999;
  std::vector<std::uint64_t> seeds{3407, 0, 1, 2, 3};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;  // throws ConfigError
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_mrr_a, val_mrr_b;
  double lr = 0.0;
};
nlohmann::json to_json(const EpochRecord& r);

struct TrainResult {
  std::unique_ptr<AbxiModel> model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_mrr_sum = 0.0;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Fills the item counts of `base` from the corpus.
ModelConfig bind_to_corpus(ModelConfig base, const Corpus& corpus);

TrainResult train(const Corpus& corpus, const Split& split, const ModelConfig& model_config,
                  const TrainConfig& train_config, std::uint64_t seed, const EpochCallback& on_epoch = {});

// Mean training loss of one pass (no parameter update); used by tests.
double evaluate_training_loss(const AbxiModel& model, const Corpus& corpus, const Split& split,
                              std::uint64_t seed, int epoch, int batch_size);

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult result;
  EvalReport test;
};

struct SweepResult {
  std::vector<SeedRun> runs;
  AggregatedReport aggregated;
};

SweepResult run_seed_sweep(const Corpus& corpus, const Split& split, const ModelConfig& model_config,
                           const TrainConfig& train_config, const EpochCallback& on_epoch = {});

}  // namespace abxi
