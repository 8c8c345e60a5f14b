// SPDX-License-Identifier: Apache-2.0
#include "adflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "adflow/errors.hpp"

namespace adflow {

double si_sdr(const Waveform& est, const Waveform& ref) {
  require_compatible(est, ref);
  const double ref_energy = dot(ref.samples(), ref.samples());
  if (!(ref_energy > 0.0)) {
    throw DegenerateInputError("si_sdr: reference is all zeros");
  }
  const double alpha = dot(est.samples(), ref.samples()) / ref_energy;
  double target = 0.0;
  double residual = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = alpha * ref[i];
    const double r = est[i] - t;
    target += t * t;
    residual += r * r;
  }
  if (residual == 0.0) return kSiSdrCapDb;
  if (target == 0.0) return -kSiSdrCapDb;
  return std::clamp(10.0 * std::log10(target / residual), -kSiSdrCapDb, kSiSdrCapDb);
}

double lsd(const Waveform& est, const Waveform& ref, const StftParams& params) {
  require_compatible(est, ref);
  const Spectrogram a = stft(est, params);
  const Spectrogram b = stft(ref, params);
  constexpr double kDelta = 1e-8;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = 10.0 * std::log10(std::abs(a.data()[i]) + kDelta) -
                     10.0 * std::log10(std::abs(b.data()[i]) + kDelta);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.data().size()));
}

double sim(const Waveform& est, const Waveform& ref, const MrRegressor& extractor) {
  const auto ea = mr_embed(extractor, est);
  const auto eb = mr_embed(extractor, ref);
  const double na = norm(ea);
  const double nb = norm(eb);
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw DegenerateInputError("sim: zero-norm embedding");
  }
  return std::clamp(dot(ea, eb) / (na * nb), -1.0, 1.0);
}

std::string EvalReport::csv_header() {
  return "tau_true,tau_hat,nfe_used,si_sdr_db,si_sdr_improvement_db,lsd_db,sim_cosine";
}

std::string EvalReport::csv_row() const {
  return format_double(tau_true) + ',' + format_double(tau_hat) + ',' +
         std::to_string(nfe_used) + ',' + format_double(si_sdr_db) + ',' +
         format_double(si_sdr_improvement_db) + ',' + format_double(lsd_db) + ',' +
         format_double(sim_cosine);
}

EvalReport evaluate(const Waveform& estimate, const Waveform& target, const Waveform& mixture,
                    double tau_true, double tau_hat, int nfe_used, const StftParams& params,
                    const MrRegressor& extractor) {
  EvalReport r;
  r.tau_true = tau_true;
  r.tau_hat = tau_hat;
  r.nfe_used = nfe_used;
  r.si_sdr_db = si_sdr(estimate, target);
  r.si_sdr_improvement_db = r.si_sdr_db - si_sdr(mixture, target);
  r.lsd_db = lsd(estimate, target, params);
  r.sim_cosine = sim(estimate, target, extractor);
  return r;
}

}  // namespace adflow
