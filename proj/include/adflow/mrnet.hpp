// SPDX-License-Identifier: Apache-2.0
//
// Mixing-ratio regression  tau_hat = sigmoid(h([w(x); w(e)])).
//
// w is a linear projection of the frame-averaged power profile (log level
// plus normalized spectral shape), shared between the mixture and the
// enrollment; h is a one-hidden-layer tanh perceptron.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adflow/features.hpp"
#include "adflow/mlp.hpp"
#include "adflow/optim.hpp"
#include "adflow/signal.hpp"
#include "adflow/velnet.hpp"

namespace adflow {

struct MrRegressorConfig {
  StftParams stft;
  int embed_dim = 32;
  int hidden = 64;

  int feature_dim() const noexcept { return power_profile_dim(stft); }

  void validate() const;
};

class MrRegressor {
 public:
  MrRegressor(MrRegressorConfig config, std::uint64_t seed);

  const MrRegressorConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  const Mlp& extractor() const noexcept { return extractor_; }
  const Mlp& head() const noexcept { return head_; }

  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  /// `ADFLOW-MRNET v1` header line, then one tensor per parameter block.
  void save(const std::filesystem::path& path) const;
  static MrRegressor load(const std::filesystem::path& path);

 private:
  explicit MrRegressor(MrRegressorConfig config);

  MrRegressorConfig config_;
  ParamLayout layout_;
  Mlp extractor_;
  Mlp head_;
  std::vector<double> params_;
};

/// w(.) applied to a precomputed power profile.
std::vector<double> mr_embed(const MrRegressor& reg, std::span<const double> features);
std::vector<double> mr_embed(const MrRegressor& reg, const Waveform& w);

/// Strictly inside (0, 1) for finite inputs.
double mr_predict(const MrRegressor& reg, const Waveform& x, const Waveform& e);
double mr_predict_features(const MrRegressor& reg, std::span<const double> x_features,
                           std::span<const double> e_features);

struct MrBatch {
  std::vector<double> x_features;  // n x feature dim
  std::vector<double> e_features;  // n x feature dim
  std::vector<double> tau;         // n

  std::size_t size() const noexcept { return tau.size(); }
  void add(std::span<const double> fx, std::span<const double> fe, double t);
  void clear();
};

/// mean((tau_hat - tau)^2) and its analytic gradient.
LossGrad mr_loss_and_grad(const MrRegressor& reg, const MrBatch& batch);

struct MrTrainResult {
  MrRegressor reg;
  std::vector<double> loss_trace;
};

struct MrTrainOptions {
  /// Extra mixtures per item per epoch. Each pairs the item's target with
  /// the background of a randomly drawn item at a tau label drawn from the
  /// dataset, and is mixed in the STFT domain.
  int remix = 0;
};

/// Regresses the dataset's tau labels with the same optimizer and schedule
/// contract as train_velocity.
MrTrainResult mr_train(MrRegressor reg, const std::vector<DatasetItem>& dataset,
                       const TrainConfig& config, const MrTrainOptions& options = {});

/// <x - b, s1 - b> / |s1 - b|^2 clamped to [0, 1]. Throws
/// DegenerateInputError when s1 == b.
double mr_oracle_lsq(std::span<const double> x, std::span<const double> s1,
                     std::span<const double> b);

namespace reference {
LossGrad mr_loss_and_grad(const MrRegressor& reg, const MrBatch& batch);
}  // namespace reference

}  // namespace adflow
