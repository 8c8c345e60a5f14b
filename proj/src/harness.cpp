// SPDX-License-Identifier: Apache-2.0
#include "adflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>

#include "adflow/csv.hpp"
#include "adflow/errors.hpp"
#include "adflow/io.hpp"
#include "adflow/rng.hpp"
#include "adflow/sampler.hpp"

namespace adflow::harness {

namespace {

constexpr std::uint64_t kVelInitStream = 0x11;
constexpr std::uint64_t kMrInitStream = 0x12;
constexpr std::uint64_t kRandomTauStream = 0x5eed;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

// Runs body(i) for i in [0, n) across threads and rethrows the first failure
// by index, so the error reported does not depend on scheduling.
template <typename Body>
void parallel_items(int n, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_split_tensors(const std::vector<DatasetItem>& items, const std::string& split,
                         const fs::path& out) {
  if (items.empty()) return;
  const auto n = static_cast<std::uint32_t>(items.size());
  const auto len = static_cast<std::uint32_t>(items.front().x.size());
  const std::uint32_t dims[2] = {n, len};
  const auto dump = [&](const char* name, auto pick) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(n) * len);
    for (const auto& item : items) {
      const Waveform& w = pick(item);
      flat.insert(flat.end(), w.vec().begin(), w.vec().end());
    }
    write_tensor_file(out / (split + "_" + name + ".adft"), dims, flat);
  };
  dump("x", [](const DatasetItem& d) -> const Waveform& { return d.x; });
  dump("e", [](const DatasetItem& d) -> const Waveform& { return d.e; });
  dump("s1", [](const DatasetItem& d) -> const Waveform& { return d.s1; });
  dump("b", [](const DatasetItem& d) -> const Waveform& { return d.b; });
}

std::string manifest_row(const std::string& split, std::size_t id, const DatasetItem& item) {
  std::string seeds;
  for (std::size_t k = 0; k < item.interferer_seeds.size(); ++k) {
    if (k) seeds += ';';
    seeds += std::to_string(item.interferer_seeds[k]);
  }
  return split + ',' + std::to_string(id) + ',' + format_double(item.tau) + ',' +
         std::to_string(item.target_seed) + ',' + seeds + ',' + format_double(item.noise_weight);
}

std::string item_name(int id) {
  std::string s = std::to_string(id);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

MrSource source_for(const std::string& name, const DatasetItem& item, const MrRegressor& reg,
                    std::uint64_t random_seed) {
  if (name == "oracle") return mr_source::Oracle{&item.s1, &item.b};
  if (name == "estimated") return mr_source::Regressor{&reg};
  if (name == "random") return mr_source::Random{random_seed};
  if (name == "tau1") return mr_source::Fixed{1.0};
  if (name == "tau0") return mr_source::Fixed{0.0};
  throw ParameterError("unknown MR source " + name);
}

void check_finite(const EvalReport& r) {
  const double v[] = {r.tau_true, r.tau_hat, r.si_sdr_db, r.si_sdr_improvement_db, r.lsd_db,
                      r.sim_cosine};
  for (double x : v) {
    if (!std::isfinite(x)) throw DivergenceError("non-finite evaluation metric", -1);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace

std::vector<DatasetItem> train_set(const RunConfig& config) {
  return make_dataset(config.n_train, TauSampler::uniform(), config.dataset(),
                      config.train_seed());
}

std::vector<DatasetItem> eval_set(const RunConfig& config) {
  return make_dataset(config.n_eval, TauSampler::uniform(), config.dataset(), config.eval_seed());
}

void write_effective_config(const RunConfig& config, const fs::path& out) {
  ensure_dir(out);
  RunConfig echoed = config;
  echoed.output_dir = out.string();
  write_text(out / "effective_config.txt", echoed.to_text());
}

void gen_data(const RunConfig& config, const fs::path& out) {
  write_effective_config(config, out);
  const auto train = train_set(config);
  const auto eval = eval_set(config);

  std::vector<std::string> rows;
  for (std::size_t i = 0; i < train.size(); ++i) rows.push_back(manifest_row("train", i, train[i]));
  for (std::size_t i = 0; i < eval.size(); ++i) rows.push_back(manifest_row("eval", i, eval[i]));
  write_csv(out / "manifest.csv", "split,item_id,tau,target_seed,interferer_seeds,noise_weight",
            rows);

  write_split_tensors(train, "train", out);
  write_split_tensors(eval, "eval", out);

  const fs::path wav = out / "wav";
  ensure_dir(wav);
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const std::string stem = "eval_" + item_name(static_cast<int>(i));
    write_wav(wav / (stem + "_x.wav"), eval[i].x);
    write_wav(wav / (stem + "_e.wav"), eval[i].e);
    write_wav(wav / (stem + "_s1.wav"), eval[i].s1);
    write_wav(wav / (stem + "_b.wav"), eval[i].b);
  }
}

VelocityTrainResult train_vel(const RunConfig& config, const fs::path& out) {
  write_effective_config(config, out);
  const auto data = train_set(config);
  VelocityNet net(config.velocity_net(), Rng::stream(config.seed, kVelInitStream).next_u64());
  VelocityTrainOptions options;
  options.path = config.path();
  options.frames_per_item = config.frames_per_item;
  auto result = train_velocity(std::move(net), data, config.velocity_training(), options);

  std::vector<std::string> rows;
  const TrainConfig tc = config.velocity_training();
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
    rows.push_back(std::to_string(e) + ',' +
                   format_double(learning_rate(tc, static_cast<int>(e))) + ',' +
                   format_double(result.loss_trace[e]));
  }
  write_csv(out / "vel_loss.csv", "epoch,lr,loss", rows);
  result.net.save(out / "vel.ckpt");
  return result;
}

double mr_rmse(const MrRegressor& reg, const std::vector<DatasetItem>& items) {
  if (items.empty()) throw ParameterError("mr_rmse: no items");
  std::vector<double> err(items.size());
  parallel_items(static_cast<int>(items.size()), [&](int i) {
    const auto& item = items[static_cast<std::size_t>(i)];
    const double d = mr_predict(reg, item.x, item.e) - item.tau;
    err[static_cast<std::size_t>(i)] = d * d;
  });
  double acc = 0.0;
  for (double e : err) acc += e;
  return std::sqrt(acc / static_cast<double>(items.size()));
}

MrTrainReport train_mr(const RunConfig& config, const fs::path& out) {
  write_effective_config(config, out);
  const auto data = train_set(config);
  MrRegressor reg(config.mr_regressor(), Rng::stream(config.seed, kMrInitStream).next_u64());
  MrTrainReport report{mr_train(std::move(reg), data, config.mr_training(), config.mr_options()), {}, {}, 0.0};

  const auto eval = eval_set(config);
  report.eval_tau.resize(eval.size());
  report.eval_tau_hat.resize(eval.size());
  parallel_items(static_cast<int>(eval.size()), [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    report.eval_tau[k] = eval[k].tau;
    report.eval_tau_hat[k] = mr_predict(report.result.reg, eval[k].x, eval[k].e);
  });
  double acc = 0.0;
  for (std::size_t k = 0; k < eval.size(); ++k) {
    const double d = report.eval_tau_hat[k] - report.eval_tau[k];
    acc += d * d;
  }
  report.eval_rmse = std::sqrt(acc / static_cast<double>(eval.size()));

  const TrainConfig tc = config.mr_training();
  std::vector<std::string> rows;
  for (std::size_t e = 0; e < report.result.loss_trace.size(); ++e) {
    rows.push_back(std::to_string(e) + ',' +
                   format_double(learning_rate(tc, static_cast<int>(e))) + ',' +
                   format_double(report.result.loss_trace[e]));
  }
  write_csv(out / "mr_loss.csv", "epoch,lr,loss", rows);

  rows.clear();
  for (std::size_t k = 0; k < eval.size(); ++k) {
    rows.push_back(std::to_string(k) + ',' + format_double(report.eval_tau[k]) + ',' +
                   format_double(report.eval_tau_hat[k]));
  }
  write_csv(out / "mr_eval.csv", "item_id,tau_true,tau_hat", rows);
  write_csv(out / "mr_summary.csv", "n_eval,rmse",
            {std::to_string(eval.size()) + ',' + format_double(report.eval_rmse)});
  report.result.reg.save(out / "mr.ckpt");
  return report;
}

const AblationSummary& AblationResult::find(const std::string& source,
                                            const std::string& field) const {
  for (const auto& s : summary) {
    if (s.source == source && s.field == field) return s;
  }
  throw ParameterError("no ablation summary for " + source + "/" + field);
}

std::uint64_t random_tau_seed(const RunConfig& config, int item) {
  return Rng::stream(config.eval_seed() ^ kRandomTauStream, static_cast<std::uint64_t>(item))
      .next_u64();
}

AblationResult run_ablation(const RunConfig& config, const VelocityNet& net,
                            const MrRegressor& reg, const std::vector<DatasetItem>& items) {
  const NfePolicy policy = config.nfe_policy();
  const StftParams stft_params = config.stft();
  const PathParams path = config.path();
  const std::size_t per_item = kAblationFields.size() * kAblationSources.size();
  std::vector<AblationRow> rows(items.size() * per_item);

  parallel_items(static_cast<int>(items.size()), [&](int i) {
    const DatasetItem& item = items[static_cast<std::size_t>(i)];
    const OracleField oracle(item.b, item.s1, path);
    const NetField learned(net, item.e);
    std::size_t slot = static_cast<std::size_t>(i) * per_item;
    for (const auto& field_name : kAblationFields) {
      const VelocityField& field =
          field_name == "oracle" ? static_cast<const VelocityField&>(oracle) : learned;
      for (const auto& source_name : kAblationSources) {
        AblationRow& row = rows[slot++];
        row.item_id = i;
        row.source = source_name;
        row.field = field_name;
        if (source_name == "mixture") {
          row.report = evaluate(item.x, item.s1, item.x, item.tau, 1.0, 0, stft_params, reg);
        } else {
          const MrSource src = source_for(source_name, item, reg, random_tau_seed(config, i));
          const auto res = extract_adaptive(item.x, item.e, src, field, policy);
          row.report = evaluate(res.estimate, item.s1, item.x, item.tau, res.tau_hat,
                                res.nfe_used, stft_params, reg);
        }
        check_finite(row.report);
      }
    }
  });

  AblationResult result;
  result.rows = std::move(rows);
  for (const auto& field_name : kAblationFields) {
    for (const auto& source_name : kAblationSources) {
      AblationSummary s;
      s.source = source_name;
      s.field = field_name;
      for (const auto& row : result.rows) {
        if (row.source != source_name || row.field != field_name) continue;
        ++s.count;
        s.mean_si_sdr_db += row.report.si_sdr_db;
        s.mean_si_sdr_improvement_db += row.report.si_sdr_improvement_db;
        s.mean_lsd_db += row.report.lsd_db;
        s.mean_sim_cosine += row.report.sim_cosine;
        s.mean_nfe += row.report.nfe_used;
      }
      if (s.count > 0) {
        const double n = s.count;
        s.mean_si_sdr_db /= n;
        s.mean_si_sdr_improvement_db /= n;
        s.mean_lsd_db /= n;
        s.mean_sim_cosine /= n;
        s.mean_nfe /= n;
      }
      result.summary.push_back(s);
    }
  }
  return result;
}

void write_ablation(const AblationResult& result, const fs::path& out) {
  ensure_dir(out);
  std::vector<std::string> rows;
  rows.reserve(result.rows.size());
  for (const auto& r : result.rows) {
    rows.push_back(std::to_string(r.item_id) + ',' + r.source + ',' + r.field + ',' +
                   r.report.csv_row());
  }
  write_csv(out / "ablation.csv", "item_id,source,field," + EvalReport::csv_header(), rows);

  rows.clear();
  for (const auto& s : result.summary) {
    rows.push_back(s.source + ',' + s.field + ',' + std::to_string(s.count) + ',' +
                   format_double(s.mean_si_sdr_db) + ',' +
                   format_double(s.mean_si_sdr_improvement_db) + ',' +
                   format_double(s.mean_lsd_db) + ',' + format_double(s.mean_sim_cosine) + ',' +
                   format_double(s.mean_nfe));
  }
  write_csv(out / "ablation_summary.csv",
            "source,field,count,mean_si_sdr_db,mean_si_sdr_improvement_db,mean_lsd_db,"
            "mean_sim_cosine,mean_nfe_used",
            rows);
}

AblationResult ablate(const RunConfig& config, const fs::path& vel_ckpt, const fs::path& mr_ckpt,
                      const fs::path& out) {
  write_effective_config(config, out);
  const VelocityNet net = VelocityNet::load(vel_ckpt);
  const MrRegressor reg = MrRegressor::load(mr_ckpt);
  auto result = run_ablation(config, net, reg, eval_set(config));
  write_ablation(result, out);
  return result;
}

std::vector<SweepRow> run_nfe_sweep(const RunConfig& config, const VelocityNet& net,
                                    const MrRegressor& reg,
                                    const std::vector<DatasetItem>& items) {
  const StftParams stft_params = config.stft();
  const PathParams path = config.path();
  const std::size_t n = items.size();
  if (n == 0) throw ParameterError("nfe sweep: no items");

  // tau_hat does not depend on the step budget; estimate it once per item.
  std::vector<double> tau_hat(n);
  parallel_items(static_cast<int>(n), [&](int i) {
    const auto& item = items[static_cast<std::size_t>(i)];
    tau_hat[static_cast<std::size_t>(i)] = mr_predict(reg, item.x, item.e);
  });

  std::vector<SweepRow> out;
  for (int budget : kSweepNfe) {
    NfePolicy policy = config.nfe_policy();
    policy.max_nfe = budget;
    std::vector<EvalReport> learned(n), oracle(n);
    parallel_items(static_cast<int>(n), [&](int i) {
      const auto k = static_cast<std::size_t>(i);
      const auto& item = items[k];
      const mr_source::Fixed src{tau_hat[k]};
      const NetField lf(net, item.e);
      const OracleField of(item.b, item.s1, path);
      const auto a = extract_adaptive(item.x, item.e, src, lf, policy);
      const auto b = extract_adaptive(item.x, item.e, src, of, policy);
      learned[k] = evaluate(a.estimate, item.s1, item.x, item.tau, a.tau_hat, a.nfe_used,
                            stft_params, reg);
      oracle[k] = evaluate(b.estimate, item.s1, item.x, item.tau, b.tau_hat, b.nfe_used,
                           stft_params, reg);
      check_finite(learned[k]);
      check_finite(oracle[k]);
    });
    const auto mean = [n](const std::vector<EvalReport>& reports) {
      SweepPoint p;
      for (const auto& r : reports) {
        p.mean_nfe_used += r.nfe_used;
        p.mean_si_sdr_db += r.si_sdr_db;
        p.mean_lsd_db += r.lsd_db;
        p.mean_sim_cosine += r.sim_cosine;
      }
      const double d = static_cast<double>(n);
      p.mean_nfe_used /= d;
      p.mean_si_sdr_db /= d;
      p.mean_lsd_db /= d;
      p.mean_sim_cosine /= d;
      return p;
    };
    out.push_back({budget, mean(learned), mean(oracle)});
  }
  return out;
}

std::string sweep_svg(const std::vector<SweepRow>& rows) {
  struct Panel {
    const char* title;
    double SweepPoint::*metric;
  };
  const Panel panels[] = {{"SI-SDR (dB)", &SweepPoint::mean_si_sdr_db},
                          {"LSD (dB)", &SweepPoint::mean_lsd_db},
                          {"SIM (cosine)", &SweepPoint::mean_sim_cosine}};
  constexpr double kPanelW = 260, kPanelH = 200, kMargin = 40, kGap = 30;
  const double width = 3 * kPanelW + 2 * kGap + 2 * kMargin;
  const double height = kPanelH + 2 * kMargin + 30;

  std::ostringstream os;
  os.precision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  if (rows.empty()) {
    os << "</svg>\n";
    return os.str();
  }

  // x axis on log2(max_nfe)
  const double lx0 = std::log2(static_cast<double>(rows.front().max_nfe));
  const double lx1 = std::log2(static_cast<double>(rows.back().max_nfe));
  for (int p = 0; p < 3; ++p) {
    const double left = kMargin + p * (kPanelW + kGap);
    const double top = kMargin;
    double lo = 1e300, hi = -1e300;
    for (const auto& r : rows) {
      for (double v : {r.learned.*(panels[p].metric), r.oracle.*(panels[p].metric)}) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (hi - lo < 1e-9) {
      lo -= 0.5;
      hi += 0.5;
    }
    const auto px = [&](int nfe) {
      const double t = lx1 > lx0 ? (std::log2(static_cast<double>(nfe)) - lx0) / (lx1 - lx0) : 0.5;
      return left + t * kPanelW;
    };
    const auto py = [&](double v) { return top + kPanelH - (v - lo) / (hi - lo) * kPanelH; };

    os << "<g>\n<text x=\"" << left + kPanelW / 2 << "\" y=\"" << top - 12
       << "\" text-anchor=\"middle\" font-size=\"13\">" << panels[p].title << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + kPanelH << "\" x2=\"" << left + kPanelW
       << "\" y2=\"" << top + kPanelH << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
       << top + kPanelH << "\" stroke=\"black\"/>\n";
    for (const auto& r : rows) {
      os << "<text x=\"" << px(r.max_nfe) << "\" y=\"" << top + kPanelH + 14
         << "\" text-anchor=\"middle\" font-size=\"10\">" << r.max_nfe << "</text>\n";
    }
    os << "<text x=\"" << left - 4 << "\" y=\"" << top + 4
       << "\" text-anchor=\"end\" font-size=\"9\">" << hi << "</text>\n";
    os << "<text x=\"" << left - 4 << "\" y=\"" << top + kPanelH
       << "\" text-anchor=\"end\" font-size=\"9\">" << lo << "</text>\n";
    const auto line = [&](const char* colour, auto pick) {
      os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (k) os << ' ';
        os << px(rows[k].max_nfe) << ',' << py(pick(rows[k]).*(panels[p].metric));
      }
      os << "\"/>\n";
    };
    line("#1f77b4", [](const SweepRow& r) -> const SweepPoint& { return r.learned; });
    line("#d62728", [](const SweepRow& r) -> const SweepPoint& { return r.oracle; });
    os << "</g>\n";
  }
  const double ly = height - 14;
  os << "<text x=\"" << kMargin << "\" y=\"" << ly
     << "\" font-size=\"11\" fill=\"#1f77b4\">learned field</text>\n";
  os << "<text x=\"" << kMargin + 110 << "\" y=\"" << ly
     << "\" font-size=\"11\" fill=\"#d62728\">oracle field</text>\n";
  os << "<text x=\"" << width - kMargin << "\" y=\"" << ly
     << "\" text-anchor=\"end\" font-size=\"11\">max NFE</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::vector<SweepRow> nfe_sweep(const RunConfig& config, const fs::path& vel_ckpt,
                                const fs::path& mr_ckpt, const fs::path& out) {
  write_effective_config(config, out);
  const VelocityNet net = VelocityNet::load(vel_ckpt);
  const MrRegressor reg = MrRegressor::load(mr_ckpt);
  auto rows = run_nfe_sweep(config, net, reg, eval_set(config));

  std::vector<std::string> lines;
  for (const auto& r : rows) {
    lines.push_back(std::to_string(r.max_nfe) + ',' + format_double(r.learned.mean_nfe_used) +
                    ',' + format_double(r.learned.mean_si_sdr_db) + ',' +
                    format_double(r.learned.mean_lsd_db) + ',' +
                    format_double(r.learned.mean_sim_cosine) + ',' +
                    format_double(r.oracle.mean_nfe_used) + ',' +
                    format_double(r.oracle.mean_si_sdr_db) + ',' +
                    format_double(r.oracle.mean_lsd_db) + ',' +
                    format_double(r.oracle.mean_sim_cosine));
  }
  write_csv(out / "nfe_sweep.csv",
            "max_nfe,learned_nfe_used,learned_si_sdr_db,learned_lsd_db,learned_sim_cosine,"
            "oracle_nfe_used,oracle_si_sdr_db,oracle_lsd_db,oracle_sim_cosine",
            lines);
  write_text(out / "nfe_sweep.svg", sweep_svg(rows));
  return rows;
}

ExtractOutcome extract_file(const RunConfig& config, const fs::path& vel_ckpt,
                            const fs::path& mr_ckpt, const fs::path& in_wav,
                            const fs::path& enroll_wav, const fs::path& out_wav,
                            const std::optional<fs::path>& reference,
                            std::optional<double> tau_true) {
  const VelocityNet net = VelocityNet::load(vel_ckpt);
  const MrRegressor reg = MrRegressor::load(mr_ckpt);
  const Waveform x = read_wav(in_wav);
  const Waveform e = read_wav(enroll_wav);
  if (x.sample_rate_hz() != e.sample_rate_hz()) {
    throw IoError("sample rate mismatch between mixture and enrollment");
  }
  if (x.sample_rate_hz() != config.sample_rate_hz) {
    throw IoError("input sample rate " + std::to_string(x.sample_rate_hz()) +
                  " does not match the configured " + std::to_string(config.sample_rate_hz));
  }

  const NetField field(net, e);
  const auto res = extract_adaptive(x, e, mr_source::Regressor{&reg}, field, config.nfe_policy());
  if (!out_wav.parent_path().empty()) ensure_dir(out_wav.parent_path());
  write_wav(out_wav, res.estimate);

  ExtractOutcome outcome;
  outcome.tau_hat = res.tau_hat;
  outcome.nfe_used = res.nfe_used;
  outcome.length = res.estimate.size();
  if (reference) {
    const Waveform ref = read_wav(*reference);
    if (ref.sample_rate_hz() != x.sample_rate_hz()) {
      throw IoError("sample rate mismatch between mixture and reference");
    }
    const Waveform written = read_wav(out_wav);
    outcome.report = evaluate(written, ref, x, tau_true.value_or(res.tau_hat), res.tau_hat,
                              res.nfe_used, config.stft(), reg);
  }
  return outcome;
}

}  // namespace adflow::harness
