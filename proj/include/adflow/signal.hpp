// SPDX-License-Identifier: Apache-2.0
//
// Synthetic sources, backgrounds and mixtures.
//
// Every component is RMS-normalized to 1 before mixing, so the mixing ratio
// tau is an exact amplitude ratio: x = tau * s1 + (1 - tau) * b.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace adflow {

inline constexpr int kDefaultSampleRate = 16000;

/// A finite, non-empty, sampled real signal.
class Waveform {
 public:
  explicit Waveform(std::vector<double> samples, int sample_rate_hz = kDefaultSampleRate);

  std::span<const double> samples() const noexcept { return samples_; }
  const std::vector<double>& vec() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  int sample_rate_hz() const noexcept { return sample_rate_hz_; }
  double operator[](std::size_t i) const noexcept { return samples_[i]; }

  double rms() const noexcept;

  friend bool operator==(const Waveform&, const Waveform&) = default;

 private:
  std::vector<double> samples_;
  int sample_rate_hz_;
};

/// Throws ShapeError unless both waveforms share length and rate.
void require_compatible(const Waveform& a, const Waveform& b);

/// Parameters of a harmonic "speaker".
struct SpeakerIdentity {
  double fundamental_hz = 120.0;
  std::vector<double> harmonic_amps;  // sums to 1, at least two entries
  double vibrato_rate_hz = 5.0;
  double vibrato_depth = 0.01;
  std::uint64_t id_seed = 0;

  /// Draws a random identity; a pure function of id_seed.
  static SpeakerIdentity draw(std::uint64_t id_seed);

  void validate() const;

  friend bool operator==(const SpeakerIdentity&, const SpeakerIdentity&) = default;
};

struct MixtureSpec {
  SpeakerIdentity target;
  std::vector<std::pair<SpeakerIdentity, double>> interferers;
  double noise_weight = 0.0;
  double tau = 0.5;
  double duration_s = 1.0;

  void validate() const;
};

/// Harmonic tone with vibrato and a slow random amplitude envelope, unit RMS.
Waveform synth_source(const SpeakerIdentity& identity, double duration_s, int sample_rate_hz,
                      std::uint64_t seed);

/// noise_weight * white noise + sum_i alpha_i * s_i, renormalized to unit RMS.
Waveform synth_background(const MixtureSpec& spec, double duration_s, int sample_rate_hz,
                          std::uint64_t seed);

/// tau * s1 + (1 - tau) * b.
Waveform mix(const Waveform& s1, const Waveform& b, double tau);

/// Returns a copy scaled to unit RMS. Throws DegenerateInputError on silence.
Waveform normalize_rms(const Waveform& w);

struct TauSampler {
  enum class Kind { kUniform, kFixed };
  Kind kind = Kind::kUniform;
  double value = 0.0;

  static TauSampler uniform() { return {}; }
  static TauSampler fixed(double tau) { return {Kind::kFixed, tau}; }
};

struct DatasetConfig {
  double duration_s = 0.5;
  int sample_rate_hz = kDefaultSampleRate;
};

struct DatasetItem {
  Waveform x;
  Waveform e;
  Waveform s1;
  Waveform b;
  double tau = 0.0;
  std::uint64_t target_seed = 0;
  std::vector<std::uint64_t> interferer_seeds;
  double noise_weight = 0.0;
};

/// Each item draws a fresh target identity, an independent enrollment of the
/// same identity, and a background of 1-2 interferers plus optional noise.
/// Items are generated in parallel from per-item streams.
std::vector<DatasetItem> make_dataset(int n_items, TauSampler tau_sampler,
                                      const DatasetConfig& config, std::uint64_t seed);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace adflow
