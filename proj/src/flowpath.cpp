// SPDX-License-Identifier: Apache-2.0
#include "adflow/flowpath.hpp"

#include <cmath>
#include <string>

#include "adflow/errors.hpp"
#include "adflow/rng.hpp"

namespace adflow {

namespace {

void check_tau(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ParameterError("tau must lie in [0, 1], got " + std::to_string(tau));
  }
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ShapeError("signal lengths differ: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

void PathParams::validate() const {
  if (!(sigma_min >= 0.0 && sigma_max >= sigma_min)) {
    throw ParameterError("path scales need 0 <= sigma_min <= sigma_max");
  }
}

Signal path_mean(std::span<const double> b, std::span<const double> s1, double tau) {
  check_lengths(b.size(), s1.size());
  check_tau(tau);
  Signal out(b.size());
  // Same expression and operand order as mix(), so the two agree bit for bit.
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = tau * s1[i] + (1.0 - tau) * b[i];
  }
  return out;
}

double path_sigma(const PathParams& params, double tau) {
  check_tau(tau);
  return (1.0 - tau) * params.sigma_max + tau * params.sigma_min;
}

PathState sample_path_state(std::span<const double> b, std::span<const double> s1, double tau,
                            const PathParams& params, std::uint64_t seed) {
  params.validate();
  PathState state{path_mean(b, s1, tau), tau};
  const double sigma = path_sigma(params, tau);
  if (sigma == 0.0) {
    return state;
  }
  Rng rng(seed);
  for (auto& v : state.x) v += sigma * rng.normal();
  return state;
}

Signal target_velocity(const PathState& state, std::span<const double> b,
                       std::span<const double> s1, const PathParams& params) {
  params.validate();
  check_lengths(b.size(), s1.size());
  check_lengths(state.x.size(), b.size());
  check_tau(state.tau);

  Signal u(b.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = s1[i] - b[i];
  if (params.constant_scale()) {
    return u;
  }

  const double sigma = path_sigma(params, state.tau);
  if (sigma == 0.0) {
    throw SingularityError("sigma_tau vanishes at tau=" + std::to_string(state.tau) +
                           " while sigma' is non-zero");
  }
  const double ratio = (params.sigma_min - params.sigma_max) / sigma;
  const Signal mean = path_mean(b, s1, state.tau);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] += ratio * (state.x[i] - mean[i]);
  }
  return u;
}

PathState analytic_state(std::span<const double> b, std::span<const double> s1,
                         std::span<const double> z, double tau, const PathParams& params) {
  params.validate();
  check_lengths(z.size(), b.size());
  PathState state{path_mean(b, s1, tau), tau};
  const double sigma = path_sigma(params, tau);
  for (std::size_t i = 0; i < z.size(); ++i) state.x[i] += sigma * z[i];
  return state;
}

}  // namespace adflow
