// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "adflow/errors.hpp"
#include "adflow/metrics.hpp"
#include "adflow/sampler.hpp"
#include "test_util.hpp"

using namespace adflow;

namespace {

Waveform scaled(const Waveform& w, double c) {
  std::vector<double> v(w.vec());
  for (double& x : v) x *= c;
  return Waveform(v, w.sample_rate_hz());
}

Waveform orthogonalized(const Waveform& b, const Waveform& s1) {
  const double a = dot(b.samples(), s1.samples()) / dot(s1.samples(), s1.samples());
  std::vector<double> v(b.vec());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= a * s1[i];
  return normalize_rms(Waveform(v));
}

}  // namespace

TEST_CASE("si-sdr caps identical and orthogonal signals") {
  const auto s = testutil::unit_rms_noise(1000, 1);
  CHECK(si_sdr(s, s) == kSiSdrCapDb);
  CHECK(si_sdr(scaled(s, 2.0), s) == kSiSdrCapDb);
  std::vector<double> sn(1600), cs(1600);
  for (std::size_t i = 0; i < sn.size(); ++i) {
    const double ph = 2 * std::numbers::pi * 5.0 * static_cast<double>(i) / 1600.0;
    sn[i] = std::sin(ph);
    cs[i] = std::cos(ph);
  }
  CHECK(si_sdr(Waveform(sn), Waveform(cs)) == -kSiSdrCapDb);
  CHECK_THROWS_AS(si_sdr(s, Waveform(std::vector<double>(1000, 0.0))), DegenerateInputError);
  CHECK_THROWS_AS(si_sdr(s, testutil::unit_rms_noise(999, 1)), ShapeError);
}

TEST_CASE("si-sdr matches a known noise level") {
  const auto s = testutil::unit_rms_noise(4000, 2);
  const auto n = orthogonalized(testutil::unit_rms_noise(4000, 3), s);
  // est = s + 0.1 n with n orthogonal to s: 10 log10(1 / 0.01) = 20 dB.
  CHECK(si_sdr(mix(s, n, 1.0 / 1.1), s) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("si-sdr is scale invariant") {
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto ref = testutil::unit_rms_noise(700, k);
    const auto est = mix(ref, testutil::unit_rms_noise(700, k + 50), 0.6);
    const double base = si_sdr(est, ref);
    for (double c : {1e-3, 0.5, 3.0, 1e4}) CHECK(std::abs(si_sdr(scaled(est, c), ref) - base) < 1e-9);
  }
}

TEST_CASE("si-sdr of the mixture grows with tau") {
  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto s1 = testutil::unit_rms_noise(2000, k);
    const auto b = orthogonalized(testutil::unit_rms_noise(2000, k + 100), s1);
    double prev = -1e9;
    for (int i = 1; i <= 21; ++i) {
      const double tau = i / 22.0;
      const double v = si_sdr(mix(s1, b, tau), s1);
      CHECK(v > prev);
      CHECK(v == doctest::Approx(20 * std::log10(tau / (1 - tau))).epsilon(1e-9));
      prev = v;
    }
  }
}

TEST_CASE("log-spectral distance examples") {
  const StftParams p{256, 64};
  const auto s = testutil::unit_rms_noise(4000, 4);
  const auto t = testutil::unit_rms_noise(4000, 5);
  CHECK(lsd(s, s, p) == 0.0);
  CHECK(lsd(scaled(s, 2.0), s, p) == doctest::Approx(10 * std::log10(2.0)).epsilon(1e-6));
  CHECK(lsd(s, t, p) == lsd(t, s, p));
  CHECK(lsd(s, t, p) > 1.0);
}

TEST_CASE("sim is a bounded cosine") {
  const MrRegressor reg({{256, 64}, 16, 8}, 3);
  const auto s = testutil::unit_rms_noise(3000, 1);
  CHECK(sim(s, s, reg) == doctest::Approx(1.0));
  for (std::uint64_t k = 0; k < 10; ++k) {
    const double v = sim(s, testutil::unit_rms_noise(3000, 10 + k), reg);
    CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("oracle extraction raises similarity over the mixture") {
  const MrRegressor reg({{256, 64}, 16, 8}, 5);
  const auto data = make_dataset(50, TauSampler::uniform(), {0.25, 16000}, 12);
  double gain = 0;
  for (const auto& item : data) {
    const auto ex = extract_adaptive(item.x, item.e, mr_source::Oracle{&item.s1, &item.b},
                                     OracleField(item.b, item.s1), {});
    gain += sim(ex.estimate, item.s1, reg) - sim(item.x, item.s1, reg);
  }
  CHECK(gain / 50 > 0.0);
}

TEST_CASE("evaluation report fields and row layout") {
  const MrRegressor reg({{256, 64}, 16, 8}, 5);
  const auto s1 = testutil::unit_rms_noise(2000, 1);
  const auto b = testutil::unit_rms_noise(2000, 2);
  const auto x = mix(s1, b, 0.5);
  const auto est = mix(s1, b, 0.8);
  const auto r = evaluate(est, s1, x, 0.5, 0.45, 3, {256, 64}, reg);
  CHECK(r.si_sdr_db == si_sdr(est, s1));
  CHECK(r.si_sdr_improvement_db == r.si_sdr_db - si_sdr(x, s1));
  CHECK(r.lsd_db == lsd(est, s1, {256, 64}));
  CHECK(r.sim_cosine == sim(est, s1, reg));
  CHECK(EvalReport::csv_header() ==
        "tau_true,tau_hat,nfe_used,si_sdr_db,si_sdr_improvement_db,lsd_db,sim_cosine");
  const auto row = r.csv_row();
  CHECK(row.rfind("0.5,0.45,3,", 0) == 0);
  CHECK(std::count(row.begin(), row.end(), ',') == 6);
}
