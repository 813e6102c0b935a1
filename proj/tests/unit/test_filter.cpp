#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "slepqns/errors.hpp"
#include "slepqns/filter.hpp"
#include "slepqns/slepian.hpp"
#include "slepqns/waveform.hpp"

using namespace slepqns;

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

Waveform dpss_cos(int n, double w, double dt, double f_s, int order = 0) {
  const auto t = compute_dpss({n, w}, order)[order];
  return normalize_power(modulate(dpss_waveform(t, 1.0, dt), Modulation::kCos, 2 * kPi * f_s), 900.0);
}
}  // namespace

TEST(Filter, ParsevalForRandomWaveforms) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    Waveform w;
    w.dt = 1e-5;
    for (int i = 0; i < 80; ++i) w.omega.push_back(100.0 * g(rng));
    const FilterCurve f(w);
    EXPECT_NEAR(4.0 / kPi * f.half_line_area() / w.power(), 1.0, 1e-12);
    EXPECT_NEAR(f.integrate(0.0, kInf) / f.half_line_area(), 1.0, 1e-6);
  }
}

TEST(Filter, AliasRatio) {
  const Waveform w = dpss_cos(200, 0.01, 1e-5, 3000.0);
  const FilterCurve f(w);
  const double wn = kPi / w.dt;
  for (double om : {0.1 * wn, 0.37 * wn, 0.8 * wn}) {
    const double ratio = f(2 * wn - om) / f(om);
    EXPECT_NEAR(ratio / (om * om / ((2 * wn - om) * (2 * wn - om))), 1.0, 1e-9);
  }
}

TEST(Filter, CurveMatchesDirectEvaluation) {
  const Waveform w = dpss_cos(128, 0.02, 2e-6, 40e3, 1);
  const FilterCurve f(w);
  for (double om : {0.0, 1e4, 2.5e5, 1.2e6}) EXPECT_NEAR(f(om), filter_eval(w, om), 1e-12 * filter_eval(w, 2 * kPi * 40e3));
}

TEST(Filter, PassbandBounds) {
  const double dt = 4e-6, w = 0.002;
  const double hw = 2 * kPi * w / dt;
  const auto low = passband_bounds(0.5 * hw, w, dt);
  EXPECT_EQ(low.lo, 0.0);
  EXPECT_NEAR(low.hi, 1.5 * hw, 1e-9);
  const auto high = passband_bounds(3 * hw, w, dt);
  EXPECT_NEAR(high.lo, 2 * hw, 1e-9);
  EXPECT_NEAR(high.hi, 4 * hw, 1e-9);
  EXPECT_NEAR(high.half_width, hw, 1e-9);
}

TEST(Filter, PassbandHoldsMostOfTheFilter) {
  const Waveform w = dpss_cos(500, 0.002, 4e-6, 5000.0);
  const FilterCurve f(w);
  const auto pb = passband(f, 2 * kPi * 5000.0, 0.002, 4e-6);
  // The in-band fraction tracks the taper's concentration (about 0.98 at NW = 1).
  const double lambda0 = compute_dpss({500, 0.002}, 0)[0].eigenvalue;
  const double total = f.half_line_area() / kPi;
  EXPECT_NEAR(pb.area / total, lambda0, 0.01);
  EXPECT_LT(pb.area / total, 1.0);
}

TEST(Filter, CombineIsLinear) {
  const FilterCurve a(dpss_cos(100, 0.02, 1e-5, 2000.0)), b(dpss_cos(100, 0.02, 1e-5, 7000.0, 1));
  const std::vector<FilterCurve> parts{a, b};
  const std::vector<double> weights{0.25, 2.0};
  const FilterCurve c = FilterCurve::combine(parts, weights);
  for (double om : {1e3, 3e4, 1e5}) EXPECT_NEAR(c(om), 0.25 * a(om) + 2.0 * b(om), 1e-12 * (a(om) + b(om)) + 1e-300);
  EXPECT_NEAR(c.half_line_area(), 0.25 * a.half_line_area() + 2.0 * b.half_line_area(), 1e-9);
}

TEST(Filter, SegmentAreasTile) {
  const FilterCurve f(dpss_cos(500, 0.002, 2e-5, 8000.0));
  const double d = 2 * kPi * 150.0;
  const auto areas = segment_areas(f, d, 94);
  double sum = 0.0;
  for (double a : areas) sum += a;
  EXPECT_NEAR(sum, f.integrate(0.0, 94 * d) / kPi, 1e-8 * sum);
}

TEST(Filter, CombFilterAtHarmonics) {
  const Waveform base = cpmg_rse(2, 30.0, 1e-4, 64);
  const FilterCurve fb(base);
  const double tb = base.duration();
  const double h = 2 * kPi / tb;
  EXPECT_NEAR(comb_filter(fb, tb, 20, 3 * h) / (400.0 * fb(3 * h)), 1.0, 1e-9);
  EXPECT_NEAR(comb_filter(base, 20, 0.37 * h), comb_filter(fb, tb, 20, 0.37 * h), 1e-12 * fb(h));
  const FilterCurve repeated(repeat_base(base, 20));
  EXPECT_NEAR(repeated(0.37 * h) / comb_filter(fb, tb, 20, 0.37 * h), 1.0, 1e-8);
}

TEST(Filter, EffectiveNyquistOfCombDurations) {
  std::vector<double> durations;
  const double tb = 942e-6;
  for (int j = 1; j <= 12; ++j) durations.push_back(tb / j);
  EXPECT_NEAR(effective_nyquist(durations, 12, tb) / (2 * kPi), 12.74e3, 100.0);
}
