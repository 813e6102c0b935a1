#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "slepqns/errors.hpp"
#include "slepqns/slepian.hpp"
#include "slepqns/waveform.hpp"

using namespace slepqns;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Waveform, NormalizePowerHitsTarget) {
  const auto t = compute_dpss({500, 0.002}, 0)[0];
  const Waveform w = normalize_power(modulate(dpss_waveform(t, 1.0, 4e-6), Modulation::kCos, 2 * kPi * 3000), 900.0);
  EXPECT_NEAR(w.power(), 900.0, 1e-9);
  EXPECT_NEAR(w.duration(), 2e-3, 1e-15);
}

TEST(Waveform, NormalizeRejectsZeroWaveform) {
  Waveform w;
  w.omega.assign(10, 0.0);
  w.dt = 1e-6;
  EXPECT_THROW(normalize_power(w, 1.0), ParameterError);
}

TEST(Waveform, ModulationModes) {
  const auto t = compute_dpss({64, 0.05}, 0)[0];
  const Waveform base = dpss_waveform(t, 2.0, 1e-6);
  const double ws = 2 * kPi * 50e3;
  const Waveform c = modulate(base, Modulation::kCos, ws), s = modulate(base, Modulation::kSin, ws);
  const Waveform none = modulate(base, Modulation::kNone, ws);
  for (int n = 0; n < 64; ++n) {
    EXPECT_NEAR(c.omega[n] * c.omega[n] + s.omega[n] * s.omega[n], base.omega[n] * base.omega[n], 1e-12);
    EXPECT_DOUBLE_EQ(none.omega[n], base.omega[n]);
  }
  EXPECT_THROW(modulate(base, Modulation::kCos, 2 * kPi / 1e-6), ParameterError);
}

TEST(Waveform, CsPairSharesPower) {
  const auto t = compute_dpss({200, 0.01}, 0)[0];
  const auto pair = normalize_pair_power(cs_pair(t, 1.0, 1e-5, 2 * kPi * 2000), 900.0);
  EXPECT_NEAR(pair.first.power() + pair.second.power(), 900.0, 1e-9);
}

TEST(Waveform, AmplitudeCap) {
  const auto t = compute_dpss({100, 0.02}, 0)[0];
  const Waveform w = normalize_power(dpss_waveform(t, 1.0, 1e-5), 900.0);
  const double peak = std::abs(*std::max_element(w.omega.begin(), w.omega.end(),
                                                 [](double a, double b) { return std::abs(a) < std::abs(b); }));
  EXPECT_NO_THROW(enforce_amplitude_cap(w, peak * 1.01));
  EXPECT_THROW(enforce_amplitude_cap(w, peak * 0.99), ParameterError);
}

TEST(Waveform, CpmgSwitchesAtExpectedTimes) {
  const Waveform w = cpmg_rse(2, 1.0, 1e-3, 400);
  // Switches at T/4 and 3T/4: + on [0, 100), - on [100, 300), + on [300, 400).
  EXPECT_EQ(w.omega[0], 1.0);
  EXPECT_EQ(w.omega[99], 1.0);
  EXPECT_EQ(w.omega[100], -1.0);
  EXPECT_EQ(w.omega[299], -1.0);
  EXPECT_EQ(w.omega[300], 1.0);
  EXPECT_NEAR(w.rotation_angle(), 0.0, 1e-15);
  EXPECT_THROW(cpmg_rse(3, 1.0, 1e-3, 400), ParameterError);  // 2n must divide N
}

TEST(Waveform, RepeatBase) {
  const Waveform b = cpmg_rse(1, 2.0, 1e-4, 10);
  const Waveform r = repeat_base(b, 5);
  EXPECT_EQ(r.size(), 50);
  EXPECT_NEAR(r.power(), 5 * b.power(), 1e-12);
}

TEST(Waveform, HilbertTransformOfCosineIsSine) {
  const int n = 256;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = std::cos(2 * kPi * 16 * i / n) * std::exp(-0.5 * std::pow((i - 128.0) / 30.0, 2));
  const auto h = hilbert_transform(x);
  for (int i = 96; i < 160; ++i) {
    const double env = std::exp(-0.5 * std::pow((i - 128.0) / 30.0, 2));
    EXPECT_NEAR(h[i], std::sin(2 * kPi * 16 * i / n) * env, 2e-3);
  }
}

TEST(Waveform, SsqmImprovesOnUniformStart) {
  const DpssParams p{500, 7.0 / 500};
  const auto c = ssqm_coefficients(p, 8e-6, 13, 7);
  ASSERT_EQ(c.c.size(), 13u);
  EXPECT_FALSE(c.optimizer_failed);
  EXPECT_LE(c.cost, c.start_cost);
  const double norm = std::sqrt(std::inner_product(c.c.begin(), c.c.end(), c.c.begin(), 0.0));
  EXPECT_NEAR(norm, 1.0, 1e-9);
  // Same seed, same answer.
  EXPECT_EQ(ssqm_coefficients(p, 8e-6, 13, 7).c, c.c);
}

TEST(Waveform, SsqmWaveformIsTaperCombination) {
  const auto tapers = compute_dpss({64, 0.05}, 1);
  const std::vector<double> c{0.6, 0.8};
  const Waveform w = ssqm_waveform(tapers, c, 3.0, 1e-6);
  for (int n = 0; n < 64; ++n)
    EXPECT_NEAR(w.omega[n], 3.0 * (0.6 * tapers[0].values[n] + 0.8 * tapers[1].values[n]), 1e-14);
}
