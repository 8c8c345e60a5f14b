// SPDX-License-Identifier: Apache-2.0
//
// Frame-wise velocity field v(x_tau, e, tau).
//
// The signal is cut into frames of frame_len samples. For frame j the network
// sees frames j-context..j+context of the current state (zero outside the
// signal), a learned linear projection of the enrollment's spectral features,
// and a sinusoidal embedding of tau; it predicts the velocity of frame j.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adflow/features.hpp"
#include "adflow/flowpath.hpp"
#include "adflow/mlp.hpp"
#include "adflow/optim.hpp"
#include "adflow/signal.hpp"

namespace adflow {

struct DatasetItem;

struct VelocityNetConfig {
  int frame_len = 64;
  int context = 1;
  int tau_embed_dim = 16;
  int enroll_embed_dim = 16;
  std::vector<int> hidden = {128, 128, 128};
  SpectralFeatureConfig features;

  int context_dim() const noexcept { return (2 * context + 1) * frame_len; }
  int input_dim() const noexcept { return context_dim() + enroll_embed_dim + tau_embed_dim; }
  void validate() const;
};

class VelocityNet {
 public:
  /// Glorot-initialized network; a pure function of (config, seed).
  VelocityNet(VelocityNetConfig config, std::uint64_t seed);

  /// All parameters zero.
  static VelocityNet zeros(VelocityNetConfig config);

  const VelocityNetConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  const Mlp& projection() const noexcept { return projection_; }
  const Mlp& body() const noexcept { return body_; }

  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  /// Writes the `ADFLOW-VELNET v1` header line followed by one tensor per
  /// parameter block in layout order.
  void save(const std::filesystem::path& path) const;
  static VelocityNet load(const std::filesystem::path& path);

 private:
  explicit VelocityNet(VelocityNetConfig config);

  VelocityNetConfig config_;
  ParamLayout layout_;
  Mlp projection_;
  Mlp body_;
  std::vector<double> params_;
};

/// [sin(2 pi f_k tau)..., cos(2 pi f_k tau)...] with dim/2 frequencies
/// spaced geometrically from 1 to 64.
std::vector<double> embed_tau(double tau, int dim);

/// Projected enrollment embedding.
std::vector<double> embed_enrollment(const VelocityNet& net, const Waveform& e);
std::vector<double> embed_enrollment_features(const VelocityNet& net,
                                              std::span<const double> features);

/// Frames frame-context..frame+context of x, zero-padded at the edges.
std::vector<double> frame_context(std::span<const double> x, std::size_t frame, int frame_len,
                                  int context);

std::size_t frame_count(std::size_t length, int frame_len);

/// One velocity frame from a context window and a projected embedding.
std::vector<double> vel_forward(const VelocityNet& net, std::span<const double> x_context,
                                std::span<const double> e_embed, double tau);

/// Velocity over a whole signal; frames are evaluated in parallel.
std::vector<double> velocity_field(const VelocityNet& net, std::span<const double> x,
                                   std::span<const double> e_embed, double tau);

/// Training examples stored row-wise.
struct VelocityBatch {
  std::vector<double> context;   // n x context_dim
  std::vector<double> features;  // n x feature dim (unprojected enrollment features)
  std::vector<double> tau;       // n
  std::vector<double> target;    // n x frame_len

  std::size_t size() const noexcept { return tau.size(); }
  void add(std::span<const double> ctx, std::span<const double> feats, double t,
           std::span<const double> tgt);
  void clear();
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean squared error over examples and elements with its analytic gradient.
/// Blocks of examples are spread over fixed reduction lanes in parallel.
LossGrad otcfm_loss_and_grad(const VelocityNet& net, const VelocityBatch& batch);

struct VelocityTrainOptions {
  PathParams path;
  int frames_per_item = 32;
};

struct VelocityTrainResult {
  VelocityNet net;
  std::vector<double> loss_trace;  // mean batch loss per epoch
};

/// Each step draws tau ~ U[0,1) per item, samples x_tau on the path,
/// regresses the target velocity on random frames, clips the global gradient
/// norm and applies AdamW at the epoch's scheduled learning rate.
VelocityTrainResult train_velocity(VelocityNet net, const std::vector<DatasetItem>& dataset,
                                   const TrainConfig& config,
                                   const VelocityTrainOptions& options = {});

namespace reference {

/// Per-example loop without blocking or threads.
LossGrad otcfm_loss_and_grad(const VelocityNet& net, const VelocityBatch& batch);

std::vector<double> velocity_field(const VelocityNet& net, std::span<const double> x,
                                   std::span<const double> e_embed, double tau);

}  // namespace reference

}  // namespace adflow
