// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion. The desk-scale
// training run reads configs/desk.cfg; its path is baked in at build time.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "adflow/config.hpp"
#include "adflow/flowpath.hpp"
#include "adflow/harness.hpp"
#include "adflow/metrics.hpp"
#include "adflow/mrnet.hpp"
#include "adflow/rng.hpp"
#include "adflow/sampler.hpp"
#include "adflow/signal.hpp"
#include "adflow/stft.hpp"
#include "adflow/velnet.hpp"

using namespace adflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Waveform noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return normalize_rms(Waveform(v));
}

double max_abs(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Outcome one_step_exactness() {
  const auto t0 = Clock::now();
  Rng rng(1);
  double worst = 0, spread = 0;
  for (int i = 0; i < 200; ++i) {
    const auto s1 = noise(4000, rng.next_u64());
    const auto b = noise(4000, rng.next_u64());
    const double tau = rng.uniform();
    const auto x = mix(s1, b, tau);
    const OracleField field(b, s1);
    NfePolicy p;
    p.mode = NfePolicy::Mode::kFixed;
    std::vector<double> first;
    for (int n = 1; n <= 20; ++n) {
      p.max_nfe = n;
      const auto est = extract(x, field, build_schedule(tau, p)).estimate;
      if (n == 1) {
        first = est.vec();
        worst = std::max(worst, max_abs(est.samples(), s1.samples()));
      }
      spread = std::max(spread, max_abs(est.samples(), first));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && spread < 1e-9 && secs < 5.0,
          "max err " + fmt("%.2e", worst) + ", N spread " + fmt("%.2e", spread) + ", " +
              fmt("%.2f", secs) + " s"};
}

Outcome ode_consistency() {
  const PathParams p{0.0, 0.5};
  const double h = 1e-4;
  Rng rng(2);
  std::vector<double> b(2000), s1(2000), z(2000);
  for (auto* v : {&b, &s1, &z}) {
    for (double& x : *v) x = rng.normal();
  }
  double worst = 0;
  for (int k = 1; k <= 9; ++k) {
    const double tau = 0.1 * k;
    const auto up = analytic_state(b, s1, z, tau + h, p);
    const auto down = analytic_state(b, s1, z, tau - h, p);
    const auto u = target_velocity(analytic_state(b, s1, z, tau, p), b, s1, p);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double fd = (up.x[i] - down.x[i]) / (2 * h);
      num += (fd - u[i]) * (fd - u[i]);
      den += u[i] * u[i];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  return {worst < 1e-6, "max relative error " + fmt("%.2e", worst)};
}

Outcome gradient_check() {
  VelocityNetConfig c;
  c.frame_len = 8;
  c.context = 1;
  c.tau_embed_dim = 4;
  c.enroll_embed_dim = 4;
  c.hidden = {12, 12};
  c.features = {{64, 16}, 4};
  double worst = 0;
  std::size_t n_params = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const VelocityNet net(c, seed);
    n_params = net.param_count();
    Rng rng(100 + seed);
    VelocityBatch batch;
    for (int i = 0; i < 16; ++i) {
      std::vector<double> ctx(static_cast<std::size_t>(c.context_dim()));
      std::vector<double> feats(static_cast<std::size_t>(c.features.dim()));
      std::vector<double> tgt(static_cast<std::size_t>(c.frame_len));
      for (auto* v : {&ctx, &feats, &tgt}) {
        for (double& x : *v) x = rng.normal();
      }
      batch.add(ctx, feats, rng.uniform(), tgt);
    }
    const auto lg = otcfm_loss_and_grad(net, batch);
    VelocityNet probe = net;
    const double h = 1e-4;
    for (std::size_t i = 0; i < net.param_count(); ++i) {
      const double p0 = probe.params()[i];
      probe.params()[i] = p0 + h;
      const double up = otcfm_loss_and_grad(probe, batch).loss;
      probe.params()[i] = p0 - h;
      const double down = otcfm_loss_and_grad(probe, batch).loss;
      probe.params()[i] = p0;
      const double fd = (up - down) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(lg.grad[i]), 1e-6});
      worst = std::max(worst, std::abs(fd - lg.grad[i]) / denom);
    }
  }
  return {worst < 1e-3, "max relative error " + fmt("%.2e", worst) + " over " +
                            std::to_string(n_params) + " parameters x 5 seeds"};
}

Outcome oracle_inversion() {
  Rng rng(4);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto s1 = noise(1000, rng.next_u64());
    const auto b = noise(1000, rng.next_u64());
    const double tau = rng.uniform();
    const auto x = mix(s1, b, tau);
    worst = std::max(worst, std::abs(mr_oracle_lsq(x.samples(), s1.samples(), b.samples()) - tau));
  }
  return {worst < 1e-9, "max |tau_hat - tau| " + fmt("%.2e", worst)};
}

Outcome misseeding_linearity() {
  Rng rng(5);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const auto s1 = noise(2000, rng.next_u64());
    const auto b = noise(2000, rng.next_u64());
    const double tau = rng.uniform();
    const double tau_hat = rng.uniform();
    NfePolicy p;
    p.max_nfe = 1 + i % 20;
    const auto est = extract(mix(s1, b, tau), OracleField(b, s1), build_schedule(tau_hat, p)).estimate;
    double err = 0, gap = 0;
    for (std::size_t k = 0; k < s1.size(); ++k) {
      err += (est[k] - s1[k]) * (est[k] - s1[k]);
      gap += (s1[k] - b[k]) * (s1[k] - b[k]);
    }
    const double expected = tau_hat >= 1 - p.epsilon ? std::abs(1 - tau) : std::abs(tau_hat - tau);
    worst = std::max(worst, std::abs(std::sqrt(err) - expected * std::sqrt(gap)));
  }
  return {worst < 1e-9, "max deviation " + fmt("%.2e", worst)};
}

struct DeskRun {
  harness::AblationResult ablation;
  double mr_rmse = 0;
  double train_seconds = 0;
};

DeskRun desk_run() {
  auto config = RunConfig::load(ADFLOW_DESK_CONFIG);
  const fs::path out = fs::temp_directory_path() / "adflow_acceptance_desk";
  fs::remove_all(out);
  config.output_dir = out.string();
  config.validate();
  const auto t0 = Clock::now();
  auto vel = harness::train_vel(config, out);
  auto mr = harness::train_mr(config, out);
  DeskRun run;
  run.train_seconds = seconds_since(t0);
  run.mr_rmse = mr.eval_rmse;
  run.ablation = harness::run_ablation(config, vel.net, mr.result.reg, harness::eval_set(config));
  std::printf("  desk run: trained in %.0f s\n", run.train_seconds);
  for (const auto& s : run.ablation.summary) {
    std::printf("  %-9s %-7s si_sdr %8.3f dB  lsd %6.2f  sim %6.3f  nfe %.2f\n", s.source.c_str(),
                s.field.c_str(), s.mean_si_sdr_db, s.mean_lsd_db, s.mean_sim_cosine, s.mean_nfe);
  }
  return run;
}

Outcome table_ordering(const DeskRun& run) {
  const auto& a = run.ablation;
  const double oracle = a.find("oracle", "learned").mean_si_sdr_db;
  const double estimated = a.find("estimated", "learned").mean_si_sdr_db;
  const double random = a.find("random", "learned").mean_si_sdr_db;
  bool passthrough = true;
  for (const auto& row : a.rows) {
    if (row.source != "tau1") continue;
    for (const auto& m : a.rows) {
      if (m.source == "mixture" && m.item_id == row.item_id && m.field == row.field) {
        passthrough = passthrough && m.report.csv_row() == row.report.csv_row();
      }
    }
  }
  const bool pass = oracle >= estimated && estimated >= random && oracle - estimated <= 1.0 &&
                    passthrough && run.train_seconds <= 600.0;
  return {pass, "oracle " + fmt("%.3f", oracle) + " >= estimated " + fmt("%.3f", estimated) +
                    " >= random " + fmt("%.3f", random) + " dB; tau=1 == mixture: " +
                    (passthrough ? "yes" : "no") + "; training " +
                    fmt("%.0f", run.train_seconds) + " s"};
}

Outcome mr_accuracy(const DeskRun& run) {
  return {run.mr_rmse < 0.08, "held-out RMSE " + fmt("%.4f", run.mr_rmse) + " (threshold 0.08)"};
}

Outcome schedule_law() {
  NfePolicy p;
  p.max_nfe = 5;
  bool ok = true;
  int prev = 1 << 30;
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    const int n = build_schedule(t, p).nfe();
    const int expect = t < 1 - p.epsilon ? std::max(1, static_cast<int>(std::ceil((1 - t) * p.max_nfe))) : 0;
    ok = ok && n == expect && n <= prev;
    prev = n;
  }
  return {ok, "101-point grid, max_nfe 5"};
}

Outcome metric_sanity() {
  double scale_dev = 0;
  bool monotone = true;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto s1 = noise(4000, 2 * k);
    auto bv = noise(4000, 2 * k + 1).vec();
    const double a = dot(bv, s1.samples()) / dot(s1.samples(), s1.samples());
    for (std::size_t i = 0; i < bv.size(); ++i) bv[i] -= a * s1[i];
    const auto b = normalize_rms(Waveform(bv));
    const auto est = mix(s1, b, 0.7);
    for (double c : {1e-3, 0.5, 2.0, 1e3}) {
      std::vector<double> sc(est.vec());
      for (double& v : sc) v *= c;
      scale_dev = std::max(scale_dev, std::abs(si_sdr(Waveform(sc), s1) - si_sdr(est, s1)));
    }
    double prev = -1e300;
    for (int i = 1; i <= 21; ++i) {
      const double v = si_sdr(mix(s1, b, i / 22.0), s1);
      monotone = monotone && v > prev;
      prev = v;
    }
  }
  double round_trip = 0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto w = noise(8000 + 37 * k, 100 + k);
    const auto back = istft(stft(w, 256, 64), w.size());
    round_trip = std::max(round_trip, max_abs(back.samples(), w.samples()));
  }
  return {scale_dev < 1e-9 && monotone && round_trip < 1e-4,
          "scale dev " + fmt("%.2e", scale_dev) + ", monotone " + (monotone ? "yes" : "no") +
              ", stft round trip " + fmt("%.2e", round_trip)};
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "adflow_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "run.cfg") << "seed = 11\nn_train = 12\nn_eval = 5\nduration_s = 0.1\n"
                                     "hidden = 32\nepochs = 3\nt_max_epochs = 3\n"
                                     "mr_epochs = 3\nmr_t_max_epochs = 3\nmr_remix = 2\n";
  const std::string cli = ADFLOW_CLI;
  for (const char* d : {"a", "b"}) {
    const std::string common = " --config " + (root / "run.cfg").string() + " --out " +
                               (root / d).string();
    for (const char* cmd : {"gen-data", "train-vel", "train-mr", "ablate", "nfe-sweep"}) {
      if (shell(cli + " " + cmd + common) != 0) return {false, std::string(cmd) + " failed"};
    }
    const auto wav = root / "a" / "wav";
    const std::string ex = cli + " extract" + common + " --in " + (wav / "eval_0000_x.wav").string() +
                           " --enroll " + (wav / "eval_0000_e.wav").string() + " --out-wav " +
                           (root / d / "est.wav").string() + " --reference " +
                           (wav / "eval_0000_s1.wav").string();
    if (shell(ex + " > " + (root / d / "extract.csv").string()) != 0) return {false, "extract failed"};
  }
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".wav") continue;
    const auto other = root / "b" / entry.path().filename();
    if (slurp(entry.path()) != slurp(other)) {
      return {false, entry.path().filename().string() + " differs"};
    }
    ++compared;
  }
  return {compared >= 10, std::to_string(compared) + " CSV/WAV outputs byte-identical"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  DeskRun desk;
  bool desk_ready = false;
  auto with_desk = [&](Outcome (*f)(const DeskRun&)) {
    return [&, f] {
      if (!desk_ready) {
        desk = desk_run();
        desk_ready = true;
      }
      return f(desk);
    };
  };
  const std::vector<Criterion> criteria = {
      {"one-step oracle exactness", one_step_exactness},
      {"ODE consistency of the flow map", ode_consistency},
      {"OT-CFM gradient check", gradient_check},
      {"MR oracle inversion", oracle_inversion},
      {"mis-seeding linearity", misseeding_linearity},
      {"ablation ordering at desk scale", with_desk(table_ordering)},
      {"MR regressor accuracy", with_desk(mr_accuracy)},
      {"schedule law", schedule_law},
      {"metric sanity", metric_sanity},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
