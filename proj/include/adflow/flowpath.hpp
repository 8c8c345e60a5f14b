// SPDX-License-Identifier: Apache-2.0
//
// Mixing-ratio-indexed conditional path between a background b (tau = 0)
// and a target s1 (tau = 1):
//
//   mu_tau    = (1 - tau) b + tau s1
//   sigma_tau = (1 - tau) sigma_max + tau sigma_min
//   x_tau     ~ N(mu_tau, sigma_tau^2 I)
//
// and its probability-flow velocity
//
//   u_tau(x) = (sigma'/sigma_tau) (x - mu_tau) + (s1 - b).
//
// With sigma_min = sigma_max = 0 the path is the deterministic mixture line
// and u is the constant field s1 - b.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adflow {

using Signal = std::vector<double>;

struct PathParams {
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  void validate() const;
  bool constant_scale() const noexcept { return sigma_min == sigma_max; }
};

struct PathState {
  Signal x;
  double tau = 0.0;
};

Signal path_mean(std::span<const double> b, std::span<const double> s1, double tau);

double path_sigma(const PathParams& params, double tau);

/// Draws x = mu_tau + sigma_tau z with z ~ N(0, I) from `seed`.
PathState sample_path_state(std::span<const double> b, std::span<const double> s1, double tau,
                            const PathParams& params, std::uint64_t seed);

/// The sigma'/sigma term is taken as zero when sigma' = 0. Throws
/// SingularityError when sigma_tau = 0 but sigma' != 0.
Signal target_velocity(const PathState& state, std::span<const double> b,
                       std::span<const double> s1, const PathParams& params);

/// Closed-form flow map mu_tau + sigma_tau z for a fixed z.
PathState analytic_state(std::span<const double> b, std::span<const double> s1,
                         std::span<const double> z, double tau, const PathParams& params);

}  // namespace adflow
