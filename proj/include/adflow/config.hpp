// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` run configuration. Lines may carry `#` comments; unknown
// keys are rejected and missing keys keep the defaults below. The optimizer
// defaults are the full-scale settings; configs/desk.cfg holds the desk-scale
// values the acceptance suite uses.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adflow/flowpath.hpp"
#include "adflow/mrnet.hpp"
#include "adflow/optim.hpp"
#include "adflow/sampler.hpp"
#include "adflow/signal.hpp"
#include "adflow/stft.hpp"
#include "adflow/velnet.hpp"

namespace adflow {

struct RunConfig {
  std::uint64_t seed = 0;
  int n_train = 500;
  int n_eval = 50;
  double duration_s = 0.5;
  int sample_rate_hz = kDefaultSampleRate;
  int n_fft = 256;
  int hop = 64;
  int n_bands = 32;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  int max_nfe = 5;
  double epsilon = 1e-3;
  std::string nfe_mode = "adaptive";

  // Velocity network and its optimizer.
  int frame_len = 64;
  int context = 1;
  int tau_embed_dim = 16;
  int enroll_embed_dim = 16;
  std::string hidden = "128,128,128";
  int frames_per_item = 32;
  double lr_init = 1e-4;
  double lr_min = 1e-5;
  int warmup_epochs = 5;
  int t_max_epochs = 50;
  double weight_decay = 0.01;
  double grad_clip = 0.5;
  int batch_size = 16;
  int epochs = 50;

  // MR regressor; shares warmup, weight decay and clipping.
  int mr_embed_dim = 32;
  int mr_hidden = 64;
  double mr_lr_init = 1e-4;
  double mr_lr_min = 1e-5;
  int mr_batch_size = 16;
  int mr_epochs = 50;
  int mr_t_max_epochs = 50;
  int mr_remix = 20;

  std::string output_dir = "out";

  static const std::vector<std::string>& keys();

  /// Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Every key in canonical order; parse(to_text()) reproduces the config.
  std::string to_text() const;

  /// Checks cross-field constraints by building every derived config.
  void validate() const;

  DatasetConfig dataset() const;
  StftParams stft() const;
  SpectralFeatureConfig features() const;
  PathParams path() const;
  NfePolicy nfe_policy() const;
  VelocityNetConfig velocity_net() const;
  MrRegressorConfig mr_regressor() const;
  MrTrainOptions mr_options() const;
  TrainConfig velocity_training() const;
  TrainConfig mr_training() const;

  std::uint64_t train_seed() const;
  std::uint64_t eval_seed() const;
};

}  // namespace adflow
