// SPDX-License-Identifier: Apache-2.0
//
// Residual-interval Euler integration. Extraction starts at the mixture
// itself, x_{tau_hat} = x, and integrates dx/dtau = v over [tau_hat, 1] on a
// uniform grid whose step count shrinks with 1 - tau_hat.
#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "adflow/flowpath.hpp"
#include "adflow/mrnet.hpp"
#include "adflow/signal.hpp"
#include "adflow/velnet.hpp"

namespace adflow {

struct NfePolicy {
  enum class Mode { kAdaptive, kFixed };

  int max_nfe = 5;
  double epsilon = 1e-3;
  Mode mode = Mode::kAdaptive;

  void validate() const;
};

struct Schedule {
  std::vector<double> taus;  // tau_hat = taus[0] < ... < taus[nfe] = 1, or empty

  int nfe() const noexcept { return taus.empty() ? 0 : static_cast<int>(taus.size()) - 1; }
};

/// Adaptive: no steps once tau_hat >= 1 - epsilon, otherwise
/// max(1, ceil((1 - tau_hat) * max_nfe)) uniform steps. Fixed: always max_nfe.
Schedule build_schedule(double tau_hat, const NfePolicy& policy);

/// x + dtau * v.
Signal euler_step(std::span<const double> x, std::span<const double> v, double dtau);

class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Signal velocity(std::span<const double> x, double tau) const = 0;
};

/// The closed-form target velocity for a known (b, s1).
class OracleField final : public VelocityField {
 public:
  OracleField(const Waveform& b, const Waveform& s1, PathParams params = {});
  Signal velocity(std::span<const double> x, double tau) const override;

 private:
  Signal b_;
  Signal s1_;
  PathParams params_;
};

/// A trained velocity network conditioned on one enrollment.
class NetField final : public VelocityField {
 public:
  NetField(const VelocityNet& net, const Waveform& enrollment);
  Signal velocity(std::span<const double> x, double tau) const override;

 private:
  const VelocityNet* net_;
  std::vector<double> embedding_;
};

struct Extraction {
  Waveform estimate;
  int nfe_used = 0;
};

/// Throws DivergenceError carrying the step index if the state turns
/// non-finite. An empty schedule returns x unchanged.
Extraction extract(const Waveform& x, const VelocityField& field, const Schedule& schedule);

namespace mr_source {
struct Oracle {
  const Waveform* s1;
  const Waveform* b;
};
struct Regressor {
  const MrRegressor* reg;
};
struct Random {
  std::uint64_t seed;
};
struct Fixed {
  double tau;
};
}  // namespace mr_source

using MrSource =
    std::variant<mr_source::Oracle, mr_source::Regressor, mr_source::Random, mr_source::Fixed>;

/// Resolves tau_hat from the chosen source.
double resolve_tau_hat(const MrSource& source, const Waveform& x, const Waveform& e);

struct AdaptiveExtraction {
  Waveform estimate;
  double tau_hat = 0.0;
  int nfe_used = 0;
};

AdaptiveExtraction extract_adaptive(const Waveform& x, const Waveform& e, const MrSource& source,
                                    const VelocityField& field, const NfePolicy& policy);

}  // namespace adflow
