// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "adflow/csv.hpp"
#include "adflow/mrnet.hpp"
#include "adflow/signal.hpp"
#include "adflow/stft.hpp"

namespace adflow {

/// SI-SDR values are clamped to +-kSiSdrCapDb.
inline constexpr double kSiSdrCapDb = 100.0;

/// Scale-invariant SDR in dB. Throws DegenerateInputError for an all-zero
/// reference.
double si_sdr(const Waveform& est, const Waveform& ref);

/// RMS over frames and bins of 10 log10(|A| + 1e-8) - 10 log10(|B| + 1e-8).
double lsd(const Waveform& est, const Waveform& ref, const StftParams& params);

/// Cosine similarity of the MR extractor embeddings w(est) and w(ref).
double sim(const Waveform& est, const Waveform& ref, const MrRegressor& extractor);

struct EvalReport {
  double tau_true = 0.0;
  double tau_hat = 0.0;
  int nfe_used = 0;
  double si_sdr_db = 0.0;
  double si_sdr_improvement_db = 0.0;
  double lsd_db = 0.0;
  double sim_cosine = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
};

/// Scores an estimate against the clean target, with the mixture as the
/// improvement baseline.
EvalReport evaluate(const Waveform& estimate, const Waveform& target, const Waveform& mixture,
                    double tau_true, double tau_hat, int nfe_used, const StftParams& params,
                    const MrRegressor& extractor);

}  // namespace adflow
