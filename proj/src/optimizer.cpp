#include "abxi/optimizer.hpp"

#include <cmath>
#include <limits>

#include "abxi/error.hpp"

namespace abxi {

AdamW::AdamW(std::vector<NamedParameter> params, AdamWOptions options)
    : params_(std::move(params)), opt_(options) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.var->value.rows(), p.var->value.cols()));
    v_.push_back(Matrix::Zero(p.var->value.rows(), p.var->value.cols()));
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.var->grad.resize(0, 0);
}

void AdamW::step(double lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i].var;
    if (node.grad.size() == 0) continue;  // untouched this step
    if (!node.grad.allFinite()) throw NumericalError("non-finite gradient in " + params_[i].name);
    node.value *= (1.0 - lr * opt_.weight_decay);
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * node.grad;
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * node.grad.cwiseAbs2();
    node.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opt_.eps);
  }
}

LrSchedule::LrSchedule(double base_lr, int warmup_epochs, double decay_factor, int plateau_epochs, int patience)
    : base_lr_(base_lr),
      warmup_(warmup_epochs),
      factor_(decay_factor),
      plateau_(plateau_epochs),
      patience_(patience),
      best_(-std::numeric_limits<double>::infinity()) {
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw ConfigError("lr decay factor must lie in (0, 1)");
  if (plateau_epochs < 1 || patience < 1) throw ConfigError("plateau and patience must be >= 1");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
}

double LrSchedule::lr(int epoch) const {
  if (epoch < warmup_) return base_lr_ * static_cast<double>(epoch + 1) / warmup_;
  return base_lr_ * std::pow(factor_, decays_);
}

bool LrSchedule::record(double metric) {
  if (metric > best_) {
    best_ = metric;
    since_improvement_ = 0;
    return true;
  }
  ++since_improvement_;
  if (since_improvement_ % plateau_ == 0) ++decays_;
  return false;
}

}  // namespace abxi
