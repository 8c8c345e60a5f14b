// SPDX-License-Identifier: Apache-2.0
#include "adflow/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "adflow/errors.hpp"

namespace adflow {

void SpectralFeatureConfig::validate() const {
  stft.validate();
  if (n_bands < 1 || n_bands > stft.n_fft / 2 + 1) {
    throw ParameterError("n_bands must lie in [1, n_fft/2 + 1]");
  }
}

std::vector<double> spectral_features(const Spectrogram& s, int n_bands) {
  const int bins = s.bins();
  if (n_bands < 1 || n_bands > bins) {
    throw ParameterError("n_bands must lie in [1, bins]");
  }
  const auto nb = static_cast<std::size_t>(n_bands);
  std::vector<double> mean(nb, 0.0);
  std::vector<double> sq(nb, 0.0);
  for (std::size_t f = 0; f < s.frames(); ++f) {
    for (int band = 0; band < n_bands; ++band) {
      const int lo = band * bins / n_bands;
      const int hi = (band + 1) * bins / n_bands;
      double power = 0.0;
      for (int k = lo; k < hi; ++k) power += std::norm(s.at(k, f));
      const double mag = std::sqrt(power / (hi - lo));
      const double v = std::log(mag + kLogFloor);
      mean[static_cast<std::size_t>(band)] += v;
      sq[static_cast<std::size_t>(band)] += v * v;
    }
  }
  const auto frames = static_cast<double>(s.frames());
  std::vector<double> out(2 * nb);
  for (std::size_t band = 0; band < nb; ++band) {
    const double m = mean[band] / frames;
    const double var = std::max(0.0, sq[band] / frames - m * m);
    out[band] = m;
    out[nb + band] = std::sqrt(var);
  }
  return out;
}

std::vector<double> spectral_features(const Waveform& w, const SpectralFeatureConfig& config) {
  config.validate();
  return spectral_features(stft(w, config.stft), config.n_bands);
}

std::vector<double> mean_power(const Spectrogram& s) {
  const auto bins = static_cast<std::size_t>(s.bins());
  std::vector<double> out(bins, 0.0);
  const auto& data = s.data();
  for (std::size_t f = 0; f < s.frames(); ++f) {
    for (std::size_t k = 0; k < bins; ++k) out[k] += std::norm(data[f * bins + k]);
  }
  for (double& v : out) v /= static_cast<double>(s.frames());
  return out;
}

std::vector<double> power_profile(std::span<const double> mean_power) {
  double total = 0.0;
  for (double v : mean_power) total += v;
  std::vector<double> out(mean_power.size() + 1, 0.0);
  out[0] = std::log(total + kLogFloor);
  if (total > 0.0) {
    for (std::size_t k = 0; k < mean_power.size(); ++k) {
      out[k + 1] = kProfileScale * mean_power[k] / total;
    }
  }
  return out;
}

std::vector<double> power_profile(const Waveform& w, const StftParams& params) {
  params.validate();
  return power_profile(mean_power(stft(w, params)));
}

}  // namespace adflow
