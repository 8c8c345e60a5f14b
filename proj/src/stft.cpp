// SPDX-License-Identifier: Apache-2.0
#include "adflow/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "adflow/errors.hpp"
#include "adflow/kernels.hpp"

namespace adflow {

void StftParams::validate() const {
  if (n_fft < 2 || n_fft % 2 != 0) {
    throw ParameterError("n_fft must be even and >= 2, got " + std::to_string(n_fft));
  }
  if (hop < 1) {
    throw ParameterError("hop must be positive");
  }
  if (n_fft < 2 * hop) {
    throw ParameterError("Hann window needs n_fft >= 2 * hop (n_fft=" + std::to_string(n_fft) +
                         ", hop=" + std::to_string(hop) + ")");
  }
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

Spectrogram::Spectrogram(int n_fft, int hop, int sample_rate_hz, std::size_t n_frames)
    : n_fft_(n_fft),
      hop_(hop),
      sample_rate_hz_(sample_rate_hz),
      frames_(n_frames),
      window_(hann_window(n_fft)),
      data_(n_frames * static_cast<std::size_t>(n_fft / 2 + 1)) {
  StftParams{n_fft, hop}.validate();
}

std::size_t stft_frame_count(std::size_t length, int n_fft, int hop) {
  StftParams{n_fft, hop}.validate();
  return 1 + length / static_cast<std::size_t>(hop);
}

Spectrogram stft(const Waveform& w, int n_fft, int hop) {
  StftParams{n_fft, hop}.validate();
  const std::size_t n_frames = stft_frame_count(w.size(), n_fft, hop);
  Spectrogram spec(n_fft, hop, w.sample_rate_hz(), n_frames);
  const auto n = static_cast<std::size_t>(n_fft);
  const auto& window = spec.window();

  const auto len = static_cast<long>(w.size());
  std::vector<double> framed(n_frames * n, 0.0);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const long start = static_cast<long>(f) * hop - n_fft / 2;
    for (long t = std::max(0L, -start); t < n_fft && start + t < len; ++t) {
      framed[f * n + static_cast<std::size_t>(t)] =
          window[static_cast<std::size_t>(t)] * w[static_cast<std::size_t>(start + t)];
    }
  }
  kernels::DftPlan plan(n_fft);
  kernels::parallel::dft_forward(plan, framed, spec.data());
  return spec;
}

Waveform istft(const Spectrogram& s, std::size_t out_len) {
  if (out_len == 0) {
    throw ParameterError("istft output length must be positive");
  }
  const auto n = static_cast<std::size_t>(s.n_fft());
  const auto hop = static_cast<std::size_t>(s.hop());
  std::vector<double> frames(s.frames() * n);
  kernels::DftPlan plan(s.n_fft());
  kernels::parallel::dft_inverse(plan, s.data(), frames);

  const auto& window = s.window();
  std::vector<double> out(out_len, 0.0);
  std::vector<double> weight(out_len, 0.0);
  const auto len = static_cast<long>(out_len);
  for (std::size_t f = 0; f < s.frames(); ++f) {
    const long start = static_cast<long>(f * hop) - s.n_fft() / 2;
    for (long t = std::max(0L, -start); t < s.n_fft() && start + t < len; ++t) {
      const auto k = static_cast<std::size_t>(t);
      const auto at = static_cast<std::size_t>(start + t);
      out[at] += window[k] * frames[f * n + k];
      weight[at] += window[k] * window[k];
    }
  }
  for (std::size_t i = 0; i < out_len; ++i) {
    out[i] = weight[i] > 1e-10 ? out[i] / weight[i] : 0.0;
  }
  return Waveform(std::move(out), s.sample_rate_hz());
}

}  // namespace adflow
