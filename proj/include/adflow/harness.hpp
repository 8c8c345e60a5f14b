// SPDX-License-Identifier: Apache-2.0
//
// Experiment drivers behind the `adflow` command line. Each command has a
// pure core that works on in-memory data and a thin wrapper that loads
// checkpoints and writes files under an output directory.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adflow/config.hpp"
#include "adflow/metrics.hpp"
#include "adflow/mrnet.hpp"
#include "adflow/signal.hpp"
#include "adflow/velnet.hpp"

namespace adflow::harness {

namespace fs = std::filesystem;

/// Datasets are regenerated from the config; train and eval use different seeds.
std::vector<DatasetItem> train_set(const RunConfig& config);
std::vector<DatasetItem> eval_set(const RunConfig& config);

/// Writes `effective_config.txt` into `out` (created if missing).
void write_effective_config(const RunConfig& config, const fs::path& out);

// ---- gen-data -------------------------------------------------------------

/// manifest.csv, {train,eval}_{x,e,s1,b}.adft and eval WAVs under wav/.
void gen_data(const RunConfig& config, const fs::path& out);

// ---- training -------------------------------------------------------------

VelocityTrainResult train_vel(const RunConfig& config, const fs::path& out);

struct MrTrainReport {
  MrTrainResult result;
  std::vector<double> eval_tau;
  std::vector<double> eval_tau_hat;
  double eval_rmse = 0.0;
};

/// Trains on the train split and scores the eval split.
MrTrainReport train_mr(const RunConfig& config, const fs::path& out);

double mr_rmse(const MrRegressor& reg, const std::vector<DatasetItem>& items);

// ---- ablation -------------------------------------------------------------

/// Row order within an item. "mixture" is the unprocessed input, scored as
/// if tau_hat were 1.
inline const std::vector<std::string> kAblationSources = {"mixture", "oracle", "estimated",
                                                          "random",  "tau1",   "tau0"};
inline const std::vector<std::string> kAblationFields = {"oracle", "learned"};

struct AblationRow {
  int item_id = 0;
  std::string source;
  std::string field;
  EvalReport report;
};

struct AblationSummary {
  std::string source;
  std::string field;
  int count = 0;
  double mean_si_sdr_db = 0.0;
  double mean_si_sdr_improvement_db = 0.0;
  double mean_lsd_db = 0.0;
  double mean_sim_cosine = 0.0;
  double mean_nfe = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // sorted by (item, field, source)
  std::vector<AblationSummary> summary;

  const AblationSummary& find(const std::string& source, const std::string& field) const;
};

/// Seed for the random-tau source of eval item `item`.
std::uint64_t random_tau_seed(const RunConfig& config, int item);

AblationResult run_ablation(const RunConfig& config, const VelocityNet& net,
                            const MrRegressor& reg, const std::vector<DatasetItem>& items);

void write_ablation(const AblationResult& result, const fs::path& out);

AblationResult ablate(const RunConfig& config, const fs::path& vel_ckpt,
                      const fs::path& mr_ckpt, const fs::path& out);

// ---- NFE sweep ------------------------------------------------------------

inline const std::vector<int> kSweepNfe = {1, 2, 5, 10, 20};

struct SweepPoint {
  double mean_nfe_used = 0.0;
  double mean_si_sdr_db = 0.0;
  double mean_lsd_db = 0.0;
  double mean_sim_cosine = 0.0;
};

struct SweepRow {
  int max_nfe = 0;
  SweepPoint learned;
  SweepPoint oracle;
};

std::vector<SweepRow> run_nfe_sweep(const RunConfig& config, const VelocityNet& net,
                                    const MrRegressor& reg, const std::vector<DatasetItem>& items);

std::string sweep_svg(const std::vector<SweepRow>& rows);

std::vector<SweepRow> nfe_sweep(const RunConfig& config, const fs::path& vel_ckpt,
                                const fs::path& mr_ckpt, const fs::path& out);

// ---- single-file extraction -----------------------------------------------

struct ExtractOutcome {
  double tau_hat = 0.0;
  int nfe_used = 0;
  std::size_t length = 0;
  std::optional<EvalReport> report;  // set when a reference is given
};

/// Metrics, when requested, are computed on the WAV as written, so they can
/// be reproduced from the files alone. `tau_true` defaults to tau_hat.
ExtractOutcome extract_file(const RunConfig& config, const fs::path& vel_ckpt,
                            const fs::path& mr_ckpt, const fs::path& in_wav,
                            const fs::path& enroll_wav, const fs::path& out_wav,
                            const std::optional<fs::path>& reference,
                            std::optional<double> tau_true = std::nullopt);

}  // namespace adflow::harness
