// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "adflow/signal.hpp"

namespace adflow {

struct StftParams {
  int n_fft = 256;
  int hop = 64;

  /// Even n_fft >= 2, 1 <= hop and n_fft >= 2 * hop (COLA for the Hann window).
  void validate() const;
};

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

class Spectrogram {
 public:
  Spectrogram(int n_fft, int hop, int sample_rate_hz, std::size_t n_frames);

  int n_fft() const noexcept { return n_fft_; }
  int hop() const noexcept { return hop_; }
  int bins() const noexcept { return n_fft_ / 2 + 1; }
  std::size_t frames() const noexcept { return frames_; }
  int sample_rate_hz() const noexcept { return sample_rate_hz_; }
  const std::vector<double>& window() const noexcept { return window_; }

  std::complex<double>& at(int bin, std::size_t frame) {
    return data_[frame * static_cast<std::size_t>(bins()) + static_cast<std::size_t>(bin)];
  }
  const std::complex<double>& at(int bin, std::size_t frame) const {
    return data_[frame * static_cast<std::size_t>(bins()) + static_cast<std::size_t>(bin)];
  }

  /// Frame-major coefficient storage.
  std::vector<std::complex<double>>& data() noexcept { return data_; }
  const std::vector<std::complex<double>>& data() const noexcept { return data_; }

 private:
  int n_fft_;
  int hop_;
  int sample_rate_hz_;
  std::size_t frames_;
  std::vector<double> window_;
  std::vector<std::complex<double>> data_;
};

/// Frame f is centred on sample f * hop, with zeros outside the signal, so
/// 1 + len / hop frames cover every sample inside a window's support.
Spectrogram stft(const Waveform& w, int n_fft, int hop);
inline Spectrogram stft(const Waveform& w, const StftParams& p) { return stft(w, p.n_fft, p.hop); }

/// Weighted overlap-add inverse, dividing by the summed squared window.
Waveform istft(const Spectrogram& s, std::size_t out_len);

/// Frame count stft() produces for a signal of the given length.
std::size_t stft_frame_count(std::size_t length, int n_fft, int hop);

}  // namespace adflow
