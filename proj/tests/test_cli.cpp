// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runs of the adflow binary on a tiny configuration.
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>

#include "adflow/config.hpp"
#include "adflow/csv.hpp"
#include "adflow/harness.hpp"
#include "adflow/io.hpp"
#include "adflow/metrics.hpp"
#include "test_util.hpp"

using namespace adflow;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "seed = 3\n"
    "n_train = 10\n"
    "n_eval = 4\n"
    "duration_s = 0.05\n"
    "hidden = 16\n"
    "frames_per_item = 4\n"
    "batch_size = 4\n"
    "epochs = 4\n"
    "t_max_epochs = 4\n"
    "warmup_epochs = 1\n"
    "lr_init = 3e-3\n"
    "mr_epochs = 4\n"
    "mr_t_max_epochs = 4\n"
    "mr_lr_init = 3e-3\n"
    "mr_embed_dim = 8\n"
    "mr_hidden = 8\n"
    "mr_remix = 1\n";

struct Run {
  int code;
  std::string output;
};

Run run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ADFLOW_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::slurp(log)};
}

// Shared fixture: one tiny run per directory, executed on first use.
struct Workspace {
  fs::path root = testutil::scratch("cli");
  fs::path cfg = root / "tiny.cfg";

  Workspace() {
    std::ofstream(cfg) << kTinyConfig;
    for (const char* d : {"a", "b"}) {
      const auto out = root / d;
      const std::string common = " --config " + cfg.string() + " --out " + out.string();
      for (const char* cmd : {"gen-data", "train-vel", "train-mr", "ablate", "nfe-sweep"}) {
        const auto r = run(std::string(cmd) + common, root / (std::string(d) + "_" + cmd + ".log"));
        if (r.code != 0) throw std::runtime_error(std::string(cmd) + " failed: " + r.output);
      }
    }
  }

  fs::path a(const std::string& f) const { return root / "a" / f; }
  fs::path b(const std::string& f) const { return root / "b" / f; }
  RunConfig config() const { return RunConfig::load(cfg); }
};

const Workspace& workspace() {
  static const Workspace ws;
  return ws;
}

std::map<std::string, std::size_t> columns(const std::string& header) {
  std::map<std::string, std::size_t> out;
  std::size_t i = 0, start = 0;
  while (true) {
    const auto comma = header.find(',', start);
    out[header.substr(start, comma - start)] = i++;
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Minimal XML check: balanced, properly nested tags and quoted attributes.
bool well_formed(const std::string& xml) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  bool saw_root = false;
  while ((pos = xml.find('<', pos)) != std::string::npos) {
    const auto end = xml.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = xml.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag.front() == '?') {
      if (tag.back() != '?') return false;
      continue;
    }
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag.front() == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" /\n"));
    if (stack.empty()) {
      if (saw_root) return false;
      saw_root = true;
    }
    if (!self_closing) stack.push_back(name);
  }
  return saw_root && stack.empty();
}

}  // namespace

TEST_CASE("every command is byte-for-byte reproducible") {
  const auto& ws = workspace();
  for (const char* f : {"manifest.csv", "vel_loss.csv", "mr_loss.csv", "mr_eval.csv",
                        "mr_summary.csv", "ablation.csv", "ablation_summary.csv",
                        "nfe_sweep.csv", "nfe_sweep.svg", "vel.ckpt", "mr.ckpt",
                        "eval_x.adft"}) {
    const std::string name = f;
    CAPTURE(name);
    const auto a = testutil::slurp(ws.a(f));
    CHECK(!a.empty());
    const auto b = testutil::slurp(ws.b(f));
    CHECK(a.size() == b.size());
    CHECK((a == b));
  }
  // The echoed configs differ only in their output directory.
  auto ca = RunConfig::load(ws.a("effective_config.txt"));
  auto cb = RunConfig::load(ws.b("effective_config.txt"));
  CHECK(fs::path(ca.output_dir) == ws.root / "a");
  cb.output_dir = ca.output_dir;
  CHECK(ca.to_text() == cb.to_text());
}

TEST_CASE("manifest ratios match the least-squares oracle") {
  const auto& ws = workspace();
  const auto config = ws.config();
  std::string header;
  const auto rows = read_csv(ws.a("manifest.csv"), &header);
  CHECK(header == "split,item_id,tau,target_seed,interferer_seeds,noise_weight");
  const auto eval = harness::eval_set(config);
  const auto train = harness::train_set(config);
  int n_eval = 0;
  for (const auto& r : rows) {
    const auto& items = r[0] == "eval" ? eval : train;
    n_eval += r[0] == "eval";
    const auto& item = items.at(std::stoul(r[1]));
    const double tau = std::stod(r[2]);
    CHECK(std::abs(mr_oracle_lsq(item.x.samples(), item.s1.samples(), item.b.samples()) - tau) <
          1e-9);
  }
  CHECK(n_eval == config.n_eval);
  CHECK(rows.size() == static_cast<std::size_t>(config.n_eval + config.n_train));
  CHECK(fs::exists(ws.a("wav/eval_0003_x.wav")));
  const auto t = read_tensor_file(ws.a("eval_s1.adft"));
  CHECK(t.dims == std::vector<std::uint32_t>{4, 800});
}

TEST_CASE("training commands log one loss per epoch and improve") {
  const auto& ws = workspace();
  for (const std::string f : {"vel_loss.csv", "mr_loss.csv"}) {
    CAPTURE(f);
    std::string header;
    const auto rows = read_csv(ws.a(f), &header);
    CHECK(header == "epoch,lr,loss");
    REQUIRE(rows.size() == 4);
    CHECK(std::stod(rows.back()[2]) < std::stod(rows.front()[2]));
  }
  const auto reg = MrRegressor::load(ws.a("mr.ckpt"));
  const auto summary = read_csv(ws.a("mr_summary.csv"));
  const auto eval = harness::eval_set(ws.config());
  CHECK(std::stod(summary.at(0).at(1)) == doctest::Approx(harness::mr_rmse(reg, eval)));
}

TEST_CASE("ablation passthrough rows equal the mixture and oracle rows hit the cap") {
  const auto& ws = workspace();
  std::string header;
  const auto rows = read_csv(ws.a("ablation.csv"), &header);
  const auto col = columns(header);
  REQUIRE(rows.size() == 4 * harness::kAblationSources.size() * harness::kAblationFields.size());
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> mixture;
  for (const auto& r : rows) {
    if (r[col.at("source")] == "mixture") mixture[{r[0], r[col.at("field")]}] = r;
  }
  int checked = 0;
  for (const auto& r : rows) {
    const auto& src = r[col.at("source")];
    const auto& field = r[col.at("field")];
    if (src == "tau1") {
      auto m = mixture.at({r[0], field});
      for (std::size_t c = col.at("tau_true"); c < r.size(); ++c) CHECK(r[c] == m[c]);
      ++checked;
    }
    if (src == "oracle" && field == "oracle") {
      CHECK(std::stod(r[col.at("si_sdr_db")]) == kSiSdrCapDb);
    }
    for (std::size_t c = col.at("tau_true"); c < r.size(); ++c) CHECK(std::isfinite(std::stod(r[c])));
  }
  CHECK(checked == 8);
}

TEST_CASE("nfe sweep has one row per budget, a flat oracle curve and valid svg") {
  const auto& ws = workspace();
  std::string header;
  const auto rows = read_csv(ws.a("nfe_sweep.csv"), &header);
  const auto col = columns(header);
  REQUIRE(rows.size() == harness::kSweepNfe.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::stoi(rows[i][0]) == harness::kSweepNfe[i]);
  }
  for (const char* m : {"oracle_si_sdr_db", "oracle_lsd_db", "oracle_sim_cosine"}) {
    double lo = 1e300, hi = -1e300;
    for (const auto& r : rows) {
      lo = std::min(lo, std::stod(r[col.at(m)]));
      hi = std::max(hi, std::stod(r[col.at(m)]));
    }
    CHECK(hi - lo < 1e-9);
  }
  const auto svg = testutil::slurp(ws.a("nfe_sweep.svg"));
  CHECK(well_formed(svg));
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK_FALSE(well_formed("<svg><g></svg>"));
  CHECK_FALSE(well_formed("<svg a=\"1></svg>"));
}

TEST_CASE("extract writes a same-length estimate and a consistent report") {
  const auto& ws = workspace();
  const auto wav = ws.a("wav");
  const auto out = ws.root / "extract";
  fs::create_directories(out);
  const std::string args = "extract --config " + ws.cfg.string() + " --out " + ws.a("").string() +
                           " --in " + (wav / "eval_0001_x.wav").string() + " --enroll " +
                           (wav / "eval_0001_e.wav").string() + " --out-wav " +
                           (out / "est.wav").string() + " --reference " +
                           (wav / "eval_0001_s1.wav").string() + " --tau-true 0.25";
  const auto r = run(args, out / "log.txt");
  REQUIRE(r.code == 0);
  std::smatch m;
  REQUIRE(std::regex_search(r.output, m, std::regex("tau_hat=([^\\n]+)")));
  const double tau_hat = std::stod(m[1]);
  CHECK(tau_hat > 0.0);
  CHECK(tau_hat < 1.0);
  REQUIRE(std::regex_search(r.output, m, std::regex("nfe_used=(\\d+)")));
  const int nfe = std::stoi(m[1]);

  const auto x = read_wav(wav / "eval_0001_x.wav");
  const auto est = read_wav(out / "est.wav");
  const auto ref = read_wav(wav / "eval_0001_s1.wav");
  CHECK(est.size() == x.size());
  const auto config = ws.config();
  const auto reg = MrRegressor::load(ws.a("mr.ckpt"));
  const auto expect = evaluate(est, ref, x, 0.25, tau_hat, nfe, config.stft(), reg);
  CHECK(r.output.find(EvalReport::csv_header() + "\n" + expect.csv_row()) != std::string::npos);
}

TEST_CASE("errors map to documented exit codes") {
  const auto& ws = workspace();
  const auto dir = ws.root / "errors";
  fs::create_directories(dir);
  const std::string cfg = " --config " + ws.cfg.string();
  std::ofstream(dir / "bad.cfg") << "no_such_key = 1\n";

  CHECK(run("gen-data --config " + (dir / "bad.cfg").string() + " --out " + dir.string(),
            dir / "1.log").code == 2);
  CHECK(run("gen-data" + cfg + " --n-train ten --out " + dir.string(), dir / "2.log").code == 2);
  CHECK(run("gen-data" + cfg + " --hop 999 --out " + dir.string(), dir / "3.log").code == 2);
  CHECK(run("bogus-command", dir / "4.log").code == 2);
  CHECK(run("ablate" + cfg + " --out " + (dir / "empty").string(), dir / "5.log").code == 4);
  CHECK(run("gen-data --config " + (dir / "missing.cfg").string(), dir / "6.log").code == 4);
  std::ofstream(dir / "junk.wav") << "not a wav file, definitely not";
  CHECK(run("extract" + cfg + " --out " + ws.a("").string() + " --in " +
                (dir / "junk.wav").string() + " --enroll " + (dir / "junk.wav").string() +
                " --out-wav " + (dir / "o.wav").string(),
            dir / "7.log").code == 4);
  const auto diverge = run("train-vel" + cfg + " --lr-init 1e300 --lr-min 1e-5 --out " +
                               (dir / "nan").string(),
                           dir / "8.log");
  CHECK(diverge.code == 3);
  CHECK(diverge.output.find("epoch") != std::string::npos);
}

TEST_CASE("the echoed config reproduces the run") {
  const auto& ws = workspace();
  const auto out = ws.root / "replay";
  const auto r = run("train-vel --config " + ws.a("effective_config.txt").string() + " --out " +
                         out.string(),
                     ws.root / "replay.log");
  REQUIRE(r.code == 0);
  CHECK(testutil::slurp(out / "vel_loss.csv") == testutil::slurp(ws.a("vel_loss.csv")));
  CHECK(testutil::slurp(out / "vel.ckpt") == testutil::slurp(ws.a("vel.ckpt")));
}
