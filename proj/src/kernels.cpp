// SPDX-License-Identifier: Apache-2.0
#include "adflow/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "adflow/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace adflow::kernels {

DftPlan::DftPlan(int n) : n_(n) {
  if (n < 2) {
    throw ParameterError("DFT length must be at least 2");
  }
  cos_.resize(static_cast<std::size_t>(n));
  sin_.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / n;
    cos_[static_cast<std::size_t>(k)] = std::cos(angle);
    sin_[static_cast<std::size_t>(k)] = std::sin(angle);
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

void check_sizes(const DftPlan& plan, std::size_t n_samples, std::size_t n_coeffs) {
  const auto n = static_cast<std::size_t>(plan.size());
  const auto bins = static_cast<std::size_t>(plan.bins());
  if (n_samples % n != 0 || n_coeffs != (n_samples / n) * bins) {
    throw ShapeError("DFT buffers do not hold the same number of frames");
  }
}

inline void forward_one(const DftPlan& plan, const double* in, std::complex<double>* out) {
  const int n = plan.size();
  for (int k = 0; k < plan.bins(); ++k) {
    double re = 0.0;
    double im = 0.0;
    std::size_t idx = 0;
    const auto step = static_cast<std::size_t>(k);
    for (int t = 0; t < n; ++t) {
      re += in[t] * plan.cos_at(idx);
      im -= in[t] * plan.sin_at(idx);
      idx += step;
      if (idx >= static_cast<std::size_t>(n)) idx -= static_cast<std::size_t>(n);
    }
    out[k] = {re, im};
  }
}

// Real inverse of a Hermitian half spectrum.
inline void inverse_one(const DftPlan& plan, const std::complex<double>* in, double* out) {
  const int n = plan.size();
  const int half = n / 2;
  const bool even = n % 2 == 0;
  for (int t = 0; t < n; ++t) {
    double acc = in[0].real();
    std::size_t idx = static_cast<std::size_t>(t);
    const auto step = static_cast<std::size_t>(t);
    const int last = even ? half - 1 : half;
    for (int k = 1; k <= last; ++k) {
      acc += 2.0 * (in[k].real() * plan.cos_at(idx) - in[k].imag() * plan.sin_at(idx));
      idx += step;
      if (idx >= static_cast<std::size_t>(n)) idx -= static_cast<std::size_t>(n);
    }
    if (even) {
      acc += (t % 2 == 0 ? 1.0 : -1.0) * in[half].real();
    }
    out[t] = acc / n;
  }
}

}  // namespace

namespace serial {

void dft_forward(const DftPlan& plan, std::span<const double> frames,
                 std::span<std::complex<double>> spectra) {
  check_sizes(plan, frames.size(), spectra.size());
  const auto n = static_cast<std::size_t>(plan.size());
  const auto bins = static_cast<std::size_t>(plan.bins());
  const std::size_t n_frames = frames.size() / n;
  for (std::size_t f = 0; f < n_frames; ++f) {
    forward_one(plan, frames.data() + f * n, spectra.data() + f * bins);
  }
}

void dft_inverse(const DftPlan& plan, std::span<const std::complex<double>> spectra,
                 std::span<double> frames) {
  check_sizes(plan, frames.size(), spectra.size());
  const auto n = static_cast<std::size_t>(plan.size());
  const auto bins = static_cast<std::size_t>(plan.bins());
  const std::size_t n_frames = frames.size() / n;
  for (std::size_t f = 0; f < n_frames; ++f) {
    inverse_one(plan, spectra.data() + f * bins, frames.data() + f * n);
  }
}

}  // namespace serial

namespace parallel {

// Mixed-radix FFT per frame; one FFT object per thread since its twiddle
// cache is not shared safely.
void dft_forward(const DftPlan& plan, std::span<const double> frames,
                 std::span<std::complex<double>> spectra) {
  check_sizes(plan, frames.size(), spectra.size());
  const auto n = static_cast<std::size_t>(plan.size());
  const auto bins = static_cast<std::size_t>(plan.bins());
  const auto n_frames = static_cast<long>(frames.size() / n);
#pragma omp parallel
  {
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> in(n);
    std::vector<std::complex<double>> out;
#pragma omp for schedule(static)
    for (long f = 0; f < n_frames; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      std::copy_n(frames.data() + fi * n, n, in.begin());
      fft.fwd(out, in);
      std::copy_n(out.begin(), bins, spectra.data() + fi * bins);
    }
  }
}

void dft_inverse(const DftPlan& plan, std::span<const std::complex<double>> spectra,
                 std::span<double> frames) {
  check_sizes(plan, frames.size(), spectra.size());
  const auto n = static_cast<std::size_t>(plan.size());
  const auto bins = static_cast<std::size_t>(plan.bins());
  const auto n_frames = static_cast<long>(frames.size() / n);
#pragma omp parallel
  {
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<std::complex<double>> in(bins);
    std::vector<double> out;
#pragma omp for schedule(static)
    for (long f = 0; f < n_frames; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      std::copy_n(spectra.data() + fi * bins, bins, in.begin());
      // Match the direct inverse: DC and Nyquist contribute their real parts only.
      in[0] = {in[0].real(), 0.0};
      if (n % 2 == 0) in[bins - 1] = {in[bins - 1].real(), 0.0};
      fft.inv(out, in, static_cast<Eigen::Index>(n));
      std::copy_n(out.begin(), n, frames.data() + fi * n);
    }
  }
}

}  // namespace parallel

}  // namespace adflow::kernels
