// SPDX-License-Identifier: Apache-2.0
#include "adflow/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "adflow/errors.hpp"

namespace adflow {

void TrainConfig::validate() const {
  if (!(lr_init > 0.0) || !(lr_min > 0.0)) {
    throw ParameterError("learning rates must be positive");
  }
  if (lr_min > lr_init) {
    throw ParameterError("lr_min must not exceed lr_init");
  }
  if (warmup_epochs < 0 || t_max_epochs <= 0) {
    throw ParameterError("warmup_epochs must be >= 0 and t_max_epochs > 0");
  }
  if (!(weight_decay >= 0.0) || !(grad_clip > 0.0)) {
    throw ParameterError("weight_decay must be >= 0 and grad_clip > 0");
  }
  if (batch_size <= 0 || epochs <= 0) {
    throw ParameterError("batch_size and epochs must be positive");
  }
}

double learning_rate(const TrainConfig& config, int epoch) {
  if (epoch < 0) {
    throw ParameterError("epoch must be non-negative");
  }
  if (epoch < config.warmup_epochs) {
    return config.lr_init * (epoch + 1) / config.warmup_epochs;
  }
  const int progress = std::min(epoch - config.warmup_epochs, config.t_max_epochs);
  const double cosine = std::cos(std::numbers::pi * progress / config.t_max_epochs);
  return config.lr_min + 0.5 * (config.lr_init - config.lr_min) * (1.0 + cosine);
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double total = std::sqrt(sq);
  if (total > max_norm) {
    const double scale = max_norm / total;
    for (auto& g : grads) g *= scale;
  }
  return total;
}

AdamW::AdamW(std::size_t n_params, double weight_decay, double beta1, double beta2, double eps)
    : weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(n_params, 0.0),
      v_(n_params, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("optimizer state does not match parameter count");
  }
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double decay = 1.0 - lr * weight_decay_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double m_hat = m_[i] / bias1;
    const double v_hat = v_[i] / bias2;
    params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

}  // namespace adflow
