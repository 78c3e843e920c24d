#pragma once

#include <cstdint>
#include <vector>

#include "abxi/model.hpp"

namespace abxi {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam with decoupled weight decay: the decay multiplies the weights
// directly and never enters the moment estimates.
class AdamW {
 public:
  AdamW(std::vector<NamedParameter> params, AdamWOptions options);

  void zero_grad();
  void step(double lr);
  std::int64_t steps() const { return steps_; }

 private:
  std::vector<NamedParameter> params_;
  AdamWOptions opt_;
  std::vector<Matrix> m_, v_;
  std::int64_t steps_ = 0;
};

// Per-epoch learning-rate control: linear warmup, multiplicative decay
// after every `plateau_epochs` consecutive epochs without improvement, and
// early stopping after `patience` such epochs.
class LrSchedule {
 public:
  LrSchedule(double base_lr, int warmup_epochs, double decay_factor, int plateau_epochs, int patience);

  double lr(int epoch) const;
  // Records the validation metric of a finished epoch; true if it improved.
  bool record(double metric);
  bool should_stop() const { return since_improvement_ >= patience_; }
  int decays() const { return decays_; }
  int epochs_since_improvement() const { return since_improvement_; }
  double best() const { return best_; }

 private:
  double base_lr_;
  int warmup_;
  double factor_;
  int plateau_;
  int patience_;
  double best_;
  int since_improvement_ = 0;
  int decays_ = 0;
};

}  // namespace abxi
