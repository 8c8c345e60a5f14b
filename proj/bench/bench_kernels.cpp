// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to compare scaling.
#include <benchmark/benchmark.h>

#include <complex>
#include <vector>

#include "adflow/kernels.hpp"
#include "adflow/rng.hpp"
#include "adflow/velnet.hpp"

using namespace adflow;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

constexpr std::size_t kFrames = 126;

template <void (*Forward)(const kernels::DftPlan&, std::span<const double>,
                          std::span<std::complex<double>>)>
void dft_forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const kernels::DftPlan plan(n);
  const auto frames = gaussian(kFrames * static_cast<std::size_t>(n), 1);
  std::vector<std::complex<double>> out(kFrames * static_cast<std::size_t>(plan.bins()));
  for (auto _ : state) {
    Forward(plan, frames, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kFrames));
}

VelocityNetConfig bench_config() {
  VelocityNetConfig c;
  c.features = {{256, 64}, 32};
  return c;
}

VelocityBatch make_batch(const VelocityNetConfig& c, std::size_t n) {
  Rng rng(3);
  VelocityBatch batch;
  const auto ctx = static_cast<std::size_t>(c.context_dim());
  const auto feat = static_cast<std::size_t>(c.features.dim());
  const auto out = static_cast<std::size_t>(c.frame_len);
  for (std::size_t i = 0; i < n; ++i) {
    batch.add(gaussian(ctx, rng.next_u64()), gaussian(feat, rng.next_u64()), rng.uniform(),
              gaussian(out, rng.next_u64()));
  }
  return batch;
}

template <LossGrad (*Loss)(const VelocityNet&, const VelocityBatch&)>
void loss_grad(benchmark::State& state) {
  const auto c = bench_config();
  const VelocityNet net(c, 1);
  const auto batch = make_batch(c, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Loss(net, batch).loss);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * state.range(0)));
}

template <std::vector<double> (*Field)(const VelocityNet&, std::span<const double>,
                                       std::span<const double>, double)>
void field(benchmark::State& state) {
  const auto c = bench_config();
  const VelocityNet net(c, 1);
  const auto x = gaussian(8000, 2);
  const std::vector<double> embed(static_cast<std::size_t>(c.enroll_embed_dim), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(Field(net, x, embed, 0.4).data());
}

}  // namespace

BENCHMARK(dft_forward<kernels::serial::dft_forward>)->Name("dft/serial")->Arg(256)->Arg(512);
BENCHMARK(dft_forward<kernels::parallel::dft_forward>)->Name("dft/parallel")->Arg(256)->Arg(512);
BENCHMARK(loss_grad<reference::otcfm_loss_and_grad>)->Name("otcfm/reference")->Arg(512);
BENCHMARK(loss_grad<otcfm_loss_and_grad>)->Name("otcfm/parallel")->Arg(512);
BENCHMARK(field<reference::velocity_field>)->Name("velocity_field/reference");
BENCHMARK(field<velocity_field>)->Name("velocity_field/parallel");

BENCHMARK_MAIN();
