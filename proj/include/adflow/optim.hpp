// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adflow {

struct TrainConfig {
  double lr_init = 1e-4;
  double lr_min = 1e-5;
  int warmup_epochs = 5;
  int t_max_epochs = 50;
  double weight_decay = 0.01;
  double grad_clip = 0.5;
  int batch_size = 16;
  int epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-epoch learning rate: linear warmup over warmup_epochs (epoch 0 gets
/// lr_init / warmup_epochs), then cosine annealing from lr_init to lr_min
/// over t_max_epochs, holding lr_min afterwards.
double learning_rate(const TrainConfig& config, int epoch);

/// Rescales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<double> grads, double max_norm);

/// Adaptive moment estimation with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::size_t n_params, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grads, double lr);

  long steps() const noexcept { return t_; }

 private:
  double weight_decay_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace adflow
