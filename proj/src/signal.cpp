// SPDX-License-Identifier: Apache-2.0
#include "adflow/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <exception>
#include <numeric>
#include <optional>
#include <string>

#include "adflow/errors.hpp"
#include "adflow/rng.hpp"

namespace adflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t sample_count(double duration_s, int sample_rate_hz) {
  if (!(duration_s > 0.0)) {
    throw ParameterError("duration must be positive, got " + std::to_string(duration_s));
  }
  if (sample_rate_hz <= 0) {
    throw ParameterError("sample rate must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  if (n == 0) {
    throw ParameterError("duration shorter than one sample");
  }
  return n;
}

void check_tau(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ParameterError("tau must lie in [0, 1], got " + std::to_string(tau));
  }
}

}  // namespace

Waveform::Waveform(std::vector<double> samples, int sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (samples_.empty()) {
    throw ParameterError("waveform must be non-empty");
  }
  if (sample_rate_hz_ <= 0) {
    throw ParameterError("sample rate must be positive");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      throw DivergenceError("non-finite sample in waveform", static_cast<long>(i));
    }
  }
}

double Waveform::rms() const noexcept {
  return std::sqrt(dot(samples_, samples_) / static_cast<double>(samples_.size()));
}

void require_compatible(const Waveform& a, const Waveform& b) {
  if (a.size() != b.size()) {
    throw ShapeError("waveform lengths differ: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.sample_rate_hz() != b.sample_rate_hz()) {
    throw ShapeError("waveform sample rates differ");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length mismatch");
  }
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

SpeakerIdentity SpeakerIdentity::draw(std::uint64_t id_seed) {
  Rng rng = Rng::stream(id_seed, 0x5eed);
  SpeakerIdentity id;
  id.id_seed = id_seed;
  id.fundamental_hz = rng.uniform(80.0, 400.0);
  const int n_harmonics = rng.uniform_int(3, 8);
  id.harmonic_amps.resize(static_cast<std::size_t>(n_harmonics));
  for (int k = 0; k < n_harmonics; ++k) {
    // Roughly 1/k spectral tilt with per-speaker colouring.
    id.harmonic_amps[static_cast<std::size_t>(k)] = rng.uniform(0.2, 1.0) / (k + 1);
  }
  const double total = std::accumulate(id.harmonic_amps.begin(), id.harmonic_amps.end(), 0.0);
  for (auto& a : id.harmonic_amps) a /= total;
  id.vibrato_rate_hz = rng.uniform(3.0, 7.0);
  id.vibrato_depth = rng.uniform(0.0, 0.03);
  return id;
}

void SpeakerIdentity::validate() const {
  if (!(fundamental_hz >= 80.0 && fundamental_hz <= 400.0)) {
    throw ParameterError("fundamental must lie in [80, 400] Hz");
  }
  if (harmonic_amps.size() < 2) {
    throw ParameterError("identity needs at least two harmonics");
  }
  double total = 0.0;
  for (double a : harmonic_amps) {
    if (!(a >= 0.0)) throw ParameterError("harmonic amplitudes must be non-negative");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ParameterError("harmonic amplitudes must sum to 1");
  }
  if (!(vibrato_rate_hz >= 0.0)) throw ParameterError("vibrato rate must be non-negative");
  if (!(vibrato_depth >= 0.0 && vibrato_depth <= 0.05)) {
    throw ParameterError("vibrato depth must lie in [0, 0.05]");
  }
}

void MixtureSpec::validate() const {
  check_tau(tau);
  if (!(noise_weight >= 0.0)) throw ParameterError("noise weight must be non-negative");
  bool any_positive = noise_weight > 0.0;
  for (const auto& [identity, weight] : interferers) {
    if (!(weight >= 0.0)) throw ParameterError("interferer weights must be non-negative");
    any_positive = any_positive || weight > 0.0;
  }
  if (!any_positive) {
    throw ParameterError("background needs at least one component with positive weight");
  }
}

Waveform normalize_rms(const Waveform& w) {
  const double r = w.rms();
  if (!(r > 0.0)) {
    throw DegenerateInputError("cannot normalize a silent waveform");
  }
  std::vector<double> out(w.vec());
  for (auto& v : out) v /= r;
  return Waveform(std::move(out), w.sample_rate_hz());
}

Waveform synth_source(const SpeakerIdentity& identity, double duration_s, int sample_rate_hz,
                      std::uint64_t seed) {
  identity.validate();
  const std::size_t n = sample_count(duration_s, sample_rate_hz);
  const double fs = sample_rate_hz;
  const double nyquist = 0.5 * fs;

  Rng rng = Rng::stream(seed, identity.id_seed);
  std::vector<double> harmonic_phase(identity.harmonic_amps.size());
  for (auto& p : harmonic_phase) p = rng.uniform(0.0, kTwoPi);
  const double vibrato_phase = rng.uniform(0.0, kTwoPi);
  const double start_phase = rng.uniform(0.0, kTwoPi);

  // Slow envelope: 1 + three low-frequency sinusoids, bounded below by 0.4.
  constexpr int kEnvelopeTerms = 3;
  double env_rate[kEnvelopeTerms], env_amp[kEnvelopeTerms], env_phase[kEnvelopeTerms];
  for (int k = 0; k < kEnvelopeTerms; ++k) {
    env_rate[k] = rng.uniform(0.5, 4.0);
    env_amp[k] = rng.uniform(0.0, 0.2);
    env_phase[k] = rng.uniform(0.0, kTwoPi);
  }

  const double top_f0 = identity.fundamental_hz * (1.0 + identity.vibrato_depth);
  std::vector<double> out(n);
  double phase = start_phase;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f0 = identity.fundamental_hz *
                      (1.0 + identity.vibrato_depth *
                                 std::sin(kTwoPi * identity.vibrato_rate_hz * t + vibrato_phase));
    double value = 0.0;
    for (std::size_t k = 0; k < identity.harmonic_amps.size(); ++k) {
      const double order = static_cast<double>(k + 1);
      if (order * top_f0 >= nyquist) break;
      value += identity.harmonic_amps[k] * std::sin(order * phase + harmonic_phase[k]);
    }
    double env = 1.0;
    for (int k = 0; k < kEnvelopeTerms; ++k) {
      env += env_amp[k] * std::sin(kTwoPi * env_rate[k] * t + env_phase[k]);
    }
    out[i] = env * value;
    phase += kTwoPi * f0 / fs;
  }
  return normalize_rms(Waveform(std::move(out), sample_rate_hz));
}

Waveform synth_background(const MixtureSpec& spec, double duration_s, int sample_rate_hz,
                          std::uint64_t seed) {
  spec.validate();
  const std::size_t n = sample_count(duration_s, sample_rate_hz);
  std::vector<double> acc(n, 0.0);

  if (spec.noise_weight > 0.0) {
    Rng rng = Rng::stream(seed, 0);
    std::vector<double> noise(n);
    for (auto& v : noise) v = rng.normal();
    const Waveform unit = normalize_rms(Waveform(std::move(noise), sample_rate_hz));
    for (std::size_t i = 0; i < n; ++i) acc[i] += spec.noise_weight * unit[i];
  }
  for (std::size_t k = 0; k < spec.interferers.size(); ++k) {
    const auto& [identity, weight] = spec.interferers[k];
    if (weight == 0.0) continue;
    const Waveform src = synth_source(identity, duration_s, sample_rate_hz,
                                      Rng::stream(seed, k + 1).next_u64());
    for (std::size_t i = 0; i < n; ++i) acc[i] += weight * src[i];
  }
  return normalize_rms(Waveform(std::move(acc), sample_rate_hz));
}

Waveform mix(const Waveform& s1, const Waveform& b, double tau) {
  require_compatible(s1, b);
  check_tau(tau);
  std::vector<double> out(s1.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = tau * s1[i] + (1.0 - tau) * b[i];
  }
  return Waveform(std::move(out), s1.sample_rate_hz());
}

std::vector<DatasetItem> make_dataset(int n_items, TauSampler tau_sampler,
                                      const DatasetConfig& config, std::uint64_t seed) {
  if (n_items <= 0) {
    throw ParameterError("dataset needs at least one item");
  }
  if (tau_sampler.kind == TauSampler::Kind::kFixed) {
    check_tau(tau_sampler.value);
  }
  sample_count(config.duration_s, config.sample_rate_hz);

  std::vector<std::optional<DatasetItem>> slots(static_cast<std::size_t>(n_items));
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_items; ++i) {
    try {
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
      const std::uint64_t target_seed = rng.next_u64();
      const std::uint64_t source_seed = rng.next_u64();
      const std::uint64_t enroll_seed = rng.next_u64();
      const std::uint64_t background_seed = rng.next_u64();
      const double drawn_tau = rng.uniform();

      MixtureSpec spec;
      spec.target = SpeakerIdentity::draw(target_seed);
      spec.duration_s = config.duration_s;
      const int n_interferers = rng.uniform_int(1, 2);
      std::vector<std::uint64_t> interferer_seeds;
      for (int k = 0; k < n_interferers; ++k) {
        const std::uint64_t id_seed = rng.next_u64();
        interferer_seeds.push_back(id_seed);
        spec.interferers.emplace_back(SpeakerIdentity::draw(id_seed), rng.uniform(0.5, 1.0));
      }
      const bool with_noise = rng.uniform() < 0.5;
      const double noise_level = rng.uniform(0.1, 0.5);
      spec.noise_weight = with_noise ? noise_level : 0.0;
      spec.tau = tau_sampler.kind == TauSampler::Kind::kFixed ? tau_sampler.value : drawn_tau;

      Waveform s1 = synth_source(spec.target, config.duration_s, config.sample_rate_hz,
                                 source_seed);
      Waveform e = synth_source(spec.target, config.duration_s, config.sample_rate_hz,
                                enroll_seed);
      Waveform b = synth_background(spec, config.duration_s, config.sample_rate_hz,
                                    background_seed);
      Waveform x = mix(s1, b, spec.tau);
      slots[static_cast<std::size_t>(i)] =
          DatasetItem{std::move(x),     std::move(e),  std::move(s1),
                      std::move(b),     spec.tau,      target_seed,
                      interferer_seeds, spec.noise_weight};
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<DatasetItem> items;
  items.reserve(slots.size());
  for (auto& slot : slots) items.push_back(std::move(*slot));
  return items;
}

}  // namespace adflow
