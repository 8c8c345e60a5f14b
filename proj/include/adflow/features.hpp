// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "adflow/signal.hpp"
#include "adflow/stft.hpp"

namespace adflow {

inline constexpr double kLogFloor = 1e-8;

struct SpectralFeatureConfig {
  StftParams stft;
  int n_bands = 32;

  int dim() const noexcept { return 2 * n_bands; }
  void validate() const;
};

/// Stats-pooled log band magnitudes: for each of n_bands contiguous groups of
/// STFT bins, the mean and standard deviation over frames of
/// log(rms magnitude + 1e-8). Layout is [means..., stds...].
std::vector<double> spectral_features(const Waveform& w, const SpectralFeatureConfig& config);
std::vector<double> spectral_features(const Spectrogram& s, int n_bands);

/// Power spectrum averaged over frames, one value per bin.
std::vector<double> mean_power(const Spectrogram& s);

inline constexpr double kProfileScale = 10.0;

/// [log(total + 1e-8), kProfileScale * P_k / total ...] for a frame-averaged
/// power spectrum P; the level and the spectral shape are kept apart. A
/// silent input gives a zero shape. Length is bins + 1.
std::vector<double> power_profile(std::span<const double> mean_power);
std::vector<double> power_profile(const Waveform& w, const StftParams& params);
inline int power_profile_dim(const StftParams& params) { return params.n_fft / 2 + 2; }

}  // namespace adflow
