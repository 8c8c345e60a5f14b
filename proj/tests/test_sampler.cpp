// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>

#include "adflow/errors.hpp"
#include "adflow/sampler.hpp"
#include "test_util.hpp"

using namespace adflow;

namespace {

struct Pair {
  Waveform s1;
  Waveform b;
};

Pair draw_pair(std::uint64_t seed, std::size_t n = 800) {
  return {testutil::unit_rms_noise(n, 2 * seed), testutil::unit_rms_noise(n, 2 * seed + 1)};
}

class NanField final : public VelocityField {
 public:
  Signal velocity(std::span<const double> x, double tau) const override {
    Signal v(x.size(), 0.0);
    if (tau > 0.5) v[3] = std::numeric_limits<double>::quiet_NaN();
    return v;
  }
};

}  // namespace

TEST_CASE("adaptive schedule follows the budget law") {
  NfePolicy p;
  p.max_nfe = 10;
  int prev = std::numeric_limits<int>::max();
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    const auto s = build_schedule(t, p);
    const int expect = t >= 1 - p.epsilon ? 0 : std::max(1, static_cast<int>(std::ceil((1 - t) * 10)));
    CHECK(s.nfe() == expect);
    CHECK(s.nfe() <= prev);
    prev = s.nfe();
    if (s.nfe() > 0) {
      CHECK(s.taus.front() == t);
      CHECK(s.taus.back() == 1.0);
      for (std::size_t j = 1; j < s.taus.size(); ++j) CHECK(s.taus[j] > s.taus[j - 1]);
    }
  }
  CHECK(build_schedule(0.0, p).nfe() == 10);
  CHECK(build_schedule(0.9995, p).nfe() == 0);
  CHECK(build_schedule(0.998, p).nfe() == 1);
}

TEST_CASE("fixed schedule always takes max_nfe steps") {
  NfePolicy p;
  p.max_nfe = 7;
  p.mode = NfePolicy::Mode::kFixed;
  for (double t : {0.0, 0.3, 0.9, 0.9999}) CHECK(build_schedule(t, p).nfe() == 7);
  CHECK(build_schedule(1.0, p).nfe() == 0);
}

TEST_CASE("schedule and step arguments are validated") {
  NfePolicy p;
  CHECK_THROWS_AS(build_schedule(1.2, p), ParameterError);
  p.max_nfe = 0;
  CHECK_THROWS_AS(build_schedule(0.5, p), ParameterError);
  const std::vector<double> x{1, 2};
  CHECK(euler_step(x, std::vector<double>{1, -1}, 0.5) == std::vector<double>{1.5, 1.5});
  CHECK_THROWS_AS(euler_step(x, std::vector<double>{1}, 0.5), ShapeError);
  CHECK_THROWS_AS(euler_step(x, x, 0.0), ParameterError);
}

TEST_CASE("oracle field with the true ratio recovers the target for any budget") {
  NfePolicy p;
  p.mode = NfePolicy::Mode::kFixed;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto [s1, b] = draw_pair(s);
    const double tau = 0.05 * static_cast<double>(s);
    const auto x = mix(s1, b, tau);
    const OracleField field(b, s1);
    Signal first;
    for (int n = 1; n <= 20; ++n) {
      p.max_nfe = n;
      const auto ex = extract(x, field, build_schedule(tau, p));
      CHECK(testutil::max_abs_diff(ex.estimate.samples(), s1.samples()) < 1e-6);
      if (n == 1) first = ex.estimate.vec();
      CHECK(testutil::max_abs_diff(ex.estimate.samples(), first) < 1e-9);
    }
  }
}

TEST_CASE("mis-seeded extraction errs linearly in the ratio error") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto [s1, b] = draw_pair(100 + static_cast<std::uint64_t>(i));
    const double tau = rng.uniform();
    const double tau_hat = rng.uniform();
    const auto x = mix(s1, b, tau);
    NfePolicy p;
    p.max_nfe = 1 + i % 7;
    p.mode = NfePolicy::Mode::kFixed;
    const auto ex = extract(x, OracleField(b, s1), build_schedule(tau_hat, p));
    Signal d(s1.size()), r(s1.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      d[k] = s1[k] - b[k];
      r[k] = ex.estimate[k] - s1[k];
    }
    CHECK(std::abs(norm(r) - std::abs(tau_hat - tau) * norm(d)) < 1e-9);
  }
}

TEST_CASE("seeding a clean target at zero overshoots") {
  const auto [s1, b] = draw_pair(9);
  const auto ex = extract_adaptive(s1, s1, mr_source::Fixed{0.0}, OracleField(b, s1), {});
  CHECK(ex.nfe_used == 5);
  for (std::size_t k = 0; k < s1.size(); k += 37) {
    CHECK(ex.estimate[k] == doctest::Approx(2 * s1[k] - b[k]));
  }
}

TEST_CASE("empty schedule passes the input through") {
  const auto [s1, b] = draw_pair(3);
  const auto x = mix(s1, b, 0.4);
  const auto ex = extract_adaptive(x, s1, mr_source::Fixed{1.0}, OracleField(b, s1), {});
  CHECK(ex.nfe_used == 0);
  CHECK(ex.estimate == x);
  CHECK(extract(x, NanField(), {}).estimate == x);
}

TEST_CASE("oracle source and field compose to the exact target") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto [s1, b] = draw_pair(s + 50);
    const auto x = mix(s1, b, 0.1 * static_cast<double>(s));
    const auto ex = extract_adaptive(x, s1, mr_source::Oracle{&s1, &b}, OracleField(b, s1), {});
    CHECK(testutil::max_abs_diff(ex.estimate.samples(), s1.samples()) < 1e-6);
  }
}

TEST_CASE("tau sources resolve as documented") {
  const auto [s1, b] = draw_pair(2);
  const auto x = mix(s1, b, 0.37);
  CHECK(resolve_tau_hat(mr_source::Oracle{&s1, &b}, x, s1) == doctest::Approx(0.37));
  CHECK(resolve_tau_hat(mr_source::Fixed{0.25}, x, s1) == 0.25);
  CHECK_THROWS_AS(resolve_tau_hat(mr_source::Fixed{-0.1}, x, s1), ParameterError);
  const double r = resolve_tau_hat(mr_source::Random{4}, x, s1);
  CHECK(r == resolve_tau_hat(mr_source::Random{4}, x, s1));
  CHECK(r != resolve_tau_hat(mr_source::Random{5}, x, s1));
  double mean = 0;
  for (std::uint64_t k = 0; k < 2000; ++k) {
    const double v = resolve_tau_hat(mr_source::Random{k}, x, s1);
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    mean += v / 2000;
  }
  CHECK(mean == doctest::Approx(0.5).epsilon(0.05));
  const MrRegressor reg({{64, 16}, 4, 4}, 1);
  const double learned = resolve_tau_hat(mr_source::Regressor{&reg}, x, s1);
  CHECK(learned == mr_predict(reg, x, s1));
}

TEST_CASE("non-finite states abort with the step index") {
  const auto x = testutil::unit_rms_noise(16, 1);
  NfePolicy p;
  p.max_nfe = 4;
  p.mode = NfePolicy::Mode::kFixed;
  try {
    extract(x, NanField(), build_schedule(0.0, p));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.index() == 3);
  }
}

TEST_CASE("network field wraps the velocity net") {
  VelocityNetConfig c;
  c.frame_len = 8;
  c.hidden = {6};
  c.features = {{64, 16}, 4};
  c.enroll_embed_dim = 3;
  c.tau_embed_dim = 2;
  const VelocityNet net(c, 4);
  const auto e = testutil::unit_rms_noise(500, 7);
  const auto x = testutil::gaussian(100, 8);
  const NetField field(net, e);
  CHECK(field.velocity(x, 0.3) == velocity_field(net, x, embed_enrollment(net, e), 0.3));
}
