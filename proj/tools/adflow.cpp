// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "adflow/config.hpp"
#include "adflow/csv.hpp"
#include "adflow/errors.hpp"
#include "adflow/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kDivergence = 3, kIo = 4 };

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

struct Common {
  std::string config_path;
  std::string out;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "key = value config file");
  cmd->add_option("--out", common.out, "output directory (overrides output_dir)");
  for (const auto& key : adflow::RunConfig::keys()) {
    if (key == "output_dir") continue;
    cmd->add_option(flag_name(key), common.overrides[key], "override `" + key + "`");
  }
}

adflow::RunConfig resolve(const Common& common) {
  adflow::RunConfig config = common.config_path.empty()
                                 ? adflow::RunConfig{}
                                 : adflow::RunConfig::load(common.config_path);
  for (const auto& [key, value] : common.overrides) {
    if (!value.empty()) config.set(key, value);
  }
  if (!common.out.empty()) config.output_dir = common.out;
  config.validate();
  return config;
}

std::string ckpt_or(const std::string& given, const adflow::RunConfig& config,
                    const char* name) {
  return given.empty() ? (std::filesystem::path(config.output_dir) / name).string() : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adflow: mixing-ratio-seeded flow matching for target source extraction"};
  app.require_subcommand(1);

  Common gen_c, vel_c, mr_c, abl_c, sweep_c, ext_c;
  std::string abl_vel, abl_mr, sweep_vel, sweep_mr, ext_vel, ext_mr;
  std::string ext_in, ext_enroll, ext_out, ext_ref;
  double ext_tau = std::numeric_limits<double>::quiet_NaN();

  auto* gen = app.add_subcommand("gen-data", "write the synthetic train/eval sets");
  add_common(gen, gen_c);
  auto* vel = app.add_subcommand("train-vel", "train the velocity network");
  add_common(vel, vel_c);
  auto* mr = app.add_subcommand("train-mr", "train the mixing-ratio regressor");
  add_common(mr, mr_c);

  auto* abl = app.add_subcommand("ablate", "score every MR source with both fields");
  add_common(abl, abl_c);
  abl->add_option("--vel-ckpt", abl_vel, "velocity checkpoint (default <out>/vel.ckpt)");
  abl->add_option("--mr-ckpt", abl_mr, "MR checkpoint (default <out>/mr.ckpt)");

  auto* sweep = app.add_subcommand("nfe-sweep", "sweep the maximum step budget");
  add_common(sweep, sweep_c);
  sweep->add_option("--vel-ckpt", sweep_vel, "velocity checkpoint (default <out>/vel.ckpt)");
  sweep->add_option("--mr-ckpt", sweep_mr, "MR checkpoint (default <out>/mr.ckpt)");

  auto* ext = app.add_subcommand("extract", "extract the target from one mixture");
  add_common(ext, ext_c);
  ext->add_option("--vel-ckpt", ext_vel, "velocity checkpoint (default <out>/vel.ckpt)");
  ext->add_option("--mr-ckpt", ext_mr, "MR checkpoint (default <out>/mr.ckpt)");
  ext->add_option("--in", ext_in, "mixture WAV")->required();
  ext->add_option("--enroll", ext_enroll, "enrollment WAV")->required();
  ext->add_option("--out-wav", ext_out, "estimate WAV")->required();
  ext->add_option("--reference", ext_ref, "clean target WAV for metrics");
  ext->add_option("--tau-true", ext_tau, "true mixing ratio reported alongside metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  namespace h = adflow::harness;
  try {
    if (*gen) {
      const auto config = resolve(gen_c);
      h::gen_data(config, config.output_dir);
      std::printf("wrote %d train and %d eval items to %s\n", config.n_train, config.n_eval,
                  config.output_dir.c_str());
    } else if (*vel) {
      const auto config = resolve(vel_c);
      const auto res = h::train_vel(config, config.output_dir);
      std::printf("velocity loss %s -> %s over %zu epochs\n",
                  adflow::format_double(res.loss_trace.front()).c_str(),
                  adflow::format_double(res.loss_trace.back()).c_str(), res.loss_trace.size());
    } else if (*mr) {
      const auto config = resolve(mr_c);
      const auto res = h::train_mr(config, config.output_dir);
      std::printf("mr held-out rmse %s\n", adflow::format_double(res.eval_rmse).c_str());
    } else if (*abl) {
      const auto config = resolve(abl_c);
      const auto res = h::ablate(config, ckpt_or(abl_vel, config, "vel.ckpt"),
                                 ckpt_or(abl_mr, config, "mr.ckpt"), config.output_dir);
      std::printf("%-10s %-8s %10s %10s\n", "source", "field", "si_sdr", "nfe");
      for (const auto& s : res.summary) {
        std::printf("%-10s %-8s %10.3f %10.3f\n", s.source.c_str(), s.field.c_str(),
                    s.mean_si_sdr_db, s.mean_nfe);
      }
    } else if (*sweep) {
      const auto config = resolve(sweep_c);
      const auto rows = h::nfe_sweep(config, ckpt_or(sweep_vel, config, "vel.ckpt"),
                                     ckpt_or(sweep_mr, config, "mr.ckpt"), config.output_dir);
      std::printf("%8s %14s %14s\n", "max_nfe", "learned_sisdr", "oracle_sisdr");
      for (const auto& r : rows) {
        std::printf("%8d %14.3f %14.3f\n", r.max_nfe, r.learned.mean_si_sdr_db,
                    r.oracle.mean_si_sdr_db);
      }
    } else if (*ext) {
      const auto config = resolve(ext_c);
      std::optional<std::filesystem::path> ref;
      if (!ext_ref.empty()) ref = ext_ref;
      const auto res = h::extract_file(config, ckpt_or(ext_vel, config, "vel.ckpt"),
                                       ckpt_or(ext_mr, config, "mr.ckpt"), ext_in, ext_enroll,
                                       ext_out, ref,
                                       std::isnan(ext_tau) ? std::nullopt : std::optional<double>(ext_tau));
      std::printf("tau_hat=%s\nnfe_used=%d\n", adflow::format_double(res.tau_hat).c_str(),
                  res.nfe_used);
      if (res.report) {
        std::printf("%s\n%s\n", adflow::EvalReport::csv_header().c_str(),
                    res.report->csv_row().c_str());
      }
    }
  } catch (const adflow::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const adflow::ParameterError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const adflow::DivergenceError& e) {
    std::fprintf(stderr, "numeric divergence: %s\n", e.what());
    return kDivergence;
  } catch (const adflow::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOk;
}
