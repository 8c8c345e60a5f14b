// SPDX-License-Identifier: Apache-2.0
#include "adflow/sampler.hpp"

#include <cmath>
#include <string>

#include "adflow/errors.hpp"
#include "adflow/rng.hpp"

namespace adflow {

void NfePolicy::validate() const {
  if (max_nfe < 1) {
    throw ParameterError("max_nfe must be >= 1");
  }
  if (!(epsilon > 0.0 && epsilon < 0.1)) {
    throw ParameterError("epsilon must lie in (0, 0.1)");
  }
}

Schedule build_schedule(double tau_hat, const NfePolicy& policy) {
  policy.validate();
  if (!(tau_hat >= 0.0 && tau_hat <= 1.0)) {
    throw ParameterError("tau_hat must lie in [0, 1], got " + std::to_string(tau_hat));
  }
  int steps = policy.max_nfe;
  if (policy.mode == NfePolicy::Mode::kAdaptive) {
    if (tau_hat >= 1.0 - policy.epsilon) {
      return {};
    }
    steps = std::max(1, static_cast<int>(std::ceil((1.0 - tau_hat) * policy.max_nfe)));
  } else if (tau_hat >= 1.0) {
    return {};
  }
  Schedule schedule;
  schedule.taus.resize(static_cast<std::size_t>(steps) + 1);
  const double span = 1.0 - tau_hat;
  for (int j = 0; j < steps; ++j) {
    schedule.taus[static_cast<std::size_t>(j)] = tau_hat + span * j / steps;
  }
  schedule.taus.back() = 1.0;
  return schedule;
}

Signal euler_step(std::span<const double> x, std::span<const double> v, double dtau) {
  if (x.size() != v.size()) {
    throw ShapeError("euler_step: state and velocity lengths differ");
  }
  if (!(dtau > 0.0)) {
    throw ParameterError("euler_step needs a positive step");
  }
  Signal out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + dtau * v[i];
  return out;
}

OracleField::OracleField(const Waveform& b, const Waveform& s1, PathParams params)
    : b_(b.vec()), s1_(s1.vec()), params_(params) {
  require_compatible(b, s1);
  params_.validate();
}

Signal OracleField::velocity(std::span<const double> x, double tau) const {
  PathState state{Signal(x.begin(), x.end()), tau};
  return target_velocity(state, b_, s1_, params_);
}

NetField::NetField(const VelocityNet& net, const Waveform& enrollment)
    : net_(&net), embedding_(embed_enrollment(net, enrollment)) {}

Signal NetField::velocity(std::span<const double> x, double tau) const {
  return velocity_field(*net_, x, embedding_, tau);
}

Extraction extract(const Waveform& x, const VelocityField& field, const Schedule& schedule) {
  if (schedule.taus.empty()) {
    return {x, 0};
  }
  Signal state = x.vec();
  for (int j = 0; j < schedule.nfe(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const double tau = schedule.taus[jj];
    const double dtau = schedule.taus[jj + 1] - tau;
    const Signal v = field.velocity(state, tau);
    if (v.size() != state.size()) {
      throw ShapeError("velocity field returned the wrong length");
    }
    state = euler_step(state, v, dtau);
    for (double s : state) {
      if (!std::isfinite(s)) {
        throw DivergenceError("extraction diverged at Euler step", j);
      }
    }
  }
  return {Waveform(std::move(state), x.sample_rate_hz()), schedule.nfe()};
}

double resolve_tau_hat(const MrSource& source, const Waveform& x, const Waveform& e) {
  struct Visitor {
    const Waveform& x;
    const Waveform& e;
    double operator()(const mr_source::Oracle& o) const {
      return mr_oracle_lsq(x.samples(), o.s1->samples(), o.b->samples());
    }
    double operator()(const mr_source::Regressor& r) const { return mr_predict(*r.reg, x, e); }
    double operator()(const mr_source::Random& r) const { return Rng(r.seed).uniform(); }
    double operator()(const mr_source::Fixed& f) const {
      if (!(f.tau >= 0.0 && f.tau <= 1.0)) {
        throw ParameterError("fixed tau must lie in [0, 1]");
      }
      return f.tau;
    }
  };
  return std::visit(Visitor{x, e}, source);
}

AdaptiveExtraction extract_adaptive(const Waveform& x, const Waveform& e, const MrSource& source,
                                    const VelocityField& field, const NfePolicy& policy) {
  const double tau_hat = resolve_tau_hat(source, x, e);
  Extraction ex = extract(x, field, build_schedule(tau_hat, policy));
  return {std::move(ex.estimate), tau_hat, ex.nfe_used};
}

}  // namespace adflow
