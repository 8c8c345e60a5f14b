// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops. Each kernel has an OpenMP implementation under
// `parallel` and a plain loop under `serial`; the serial versions are the
// reference the tests and benchmarks compare to. The parallel DFT uses an
// FFT, so it agrees with the direct sum to rounding rather than bitwise.
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace adflow::kernels {

/// Twiddle tables for a real DFT of length n.
class DftPlan {
 public:
  explicit DftPlan(int n);

  int size() const noexcept { return n_; }
  int bins() const noexcept { return n_ / 2 + 1; }
  double cos_at(std::size_t k) const noexcept { return cos_[k % cos_.size()]; }
  double sin_at(std::size_t k) const noexcept { return sin_[k % sin_.size()]; }

 private:
  int n_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

// `frames` is frame-major with plan.size() samples per frame; `spectra` is
// frame-major with plan.bins() coefficients per frame.
namespace serial {
void dft_forward(const DftPlan& plan, std::span<const double> frames,
                 std::span<std::complex<double>> spectra);
void dft_inverse(const DftPlan& plan, std::span<const std::complex<double>> spectra,
                 std::span<double> frames);
}  // namespace serial

namespace parallel {
void dft_forward(const DftPlan& plan, std::span<const double> frames,
                 std::span<std::complex<double>> spectra);
void dft_inverse(const DftPlan& plan, std::span<const std::complex<double>> spectra,
                 std::span<double> frames);
}  // namespace parallel

/// Number of fixed reduction lanes for batched gradients. Work is dealt to
/// lanes round-robin and lanes are summed in order, so results do not
/// depend on the OpenMP thread count.
inline constexpr int kReductionLanes = 8;

/// Examples per Eigen block inside a lane.
inline constexpr int kBlockSize = 32;

int max_threads();

}  // namespace adflow::kernels
