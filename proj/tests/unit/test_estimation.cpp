#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "slepqns/errors.hpp"
#include "slepqns/estimation.hpp"
#include "slepqns/slepian.hpp"
#include "slepqns/waveform.hpp"

using namespace slepqns;

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

struct Channel {
  FilterCurve filter;
  PassbandSpec pb;
};

Channel dpss_channel(const Taper& t, double dt, double w, double omega_s) {
  const Waveform wf = normalize_power(modulate(dpss_waveform(t, 1.0, dt), Modulation::kCos, omega_s), 900.0);
  Channel c{FilterCurve(wf), {}};
  c.pb = passband(c.filter, omega_s, w, dt);
  return c;
}
}  // namespace

TEST(Estimation, EigenestimateScalesByArea) {
  const ExperimentResult r = summarize_counts({{Axis::kZ, 2000, 1800}}, SignalModel::kLinear);
  PassbandSpec pb;
  pb.area = 250.0;
  const auto e = eigenestimate(r, pb);
  EXPECT_NEAR(e.value, 0.1 / 250.0, 1e-18);
  EXPECT_NEAR(e.variance, 0.09 / (2000 * 250.0 * 250.0), 1e-20);
  pb.area = 0.0;
  EXPECT_THROW(eigenestimate(r, pb), ParameterError);
}

TEST(Estimation, ExpectedEstimateIsLinearInPsd) {
  const auto t = compute_dpss({500, 0.002}, 0)[0];
  const Channel c = dpss_channel(t, 4e-6, 0.002, kTwoPi * 4000.0);
  const PsdModel a(Lorentzian{4e-4, kTwoPi * 4620.0, kTwoPi * 1110.0});
  const PsdModel b(GaussianMix{{{1e-4, kTwoPi * 2000.0, kTwoPi * 500.0}}});
  const PsdModel a2(Lorentzian{8e-4, kTwoPi * 4620.0, kTwoPi * 1110.0});
  const double ea = expected_estimate(a, c.filter, c.pb), eb = expected_estimate(b, c.filter, c.pb);
  EXPECT_NEAR(expected_estimate(a2, c.filter, c.pb) / (2 * ea), 1.0, 1e-9);
  // Sum of models through a GridSpectrum-free check: flat level scales exactly.
  const double f1 = expected_estimate(PsdModel(Flat{1e-4}), c.filter, c.pb);
  const double f3 = expected_estimate(PsdModel(Flat{3e-4}), c.filter, c.pb);
  EXPECT_NEAR(f3 / (3 * f1), 1.0, 1e-9);
  EXPECT_GT(eb, 0.0);
}

TEST(Estimation, FlatSpectrumEstimateIsTotalOverPassbandArea) {
  const auto t = compute_dpss({500, 0.002}, 0)[0];
  const Channel c = dpss_channel(t, 4e-6, 0.002, kTwoPi * 4000.0);
  const double level = 2e-4;
  const double e = expected_estimate(PsdModel(Flat{level}), c.filter, c.pb);
  EXPECT_NEAR(e / (level * c.filter.half_line_area() / (kPi * c.pb.area)), 1.0, 1e-6);
}

TEST(Estimation, BroadbandRowReproducesBias) {
  const auto t = compute_dpss({200, 0.01}, 0)[0];
  const double dt = 1e-5;
  const Channel c = dpss_channel(t, dt, 0.01, kTwoPi * 15000.0);
  std::vector<double> knots, values;
  for (int p = 0; p < 12; ++p) {
    knots.push_back(kTwoPi * 4000.0 * p);
    values.push_back(1e-4 * (1.0 + 0.5 * std::sin(0.7 * p)));
  }
  const auto row = broadband_bias_row(knots, c.pb, c.filter);
  const double direct = broadband_bias(GridSpectrum(knots, values), c.pb, c.filter);
  EXPECT_NEAR(std::inner_product(row.begin(), row.end(), values.begin(), 0.0) / direct, 1.0, 1e-6);
}

TEST(Estimation, GridSpectrumSlopeIsForwardDifference) {
  const GridSpectrum g({0.0, 1.0, 3.0}, {1.0, 2.0, 0.0});
  EXPECT_DOUBLE_EQ(*g.slope(0), 1.0);
  EXPECT_DOUBLE_EQ(*g.slope(1), -1.0);
  EXPECT_FALSE(g.slope(2).has_value());
  EXPECT_DOUBLE_EQ(g(2.0), 1.0);
  EXPECT_DOUBLE_EQ(g(10.0), 0.0);
}

TEST(Estimation, MultitaperRecoversFlatSpectrum) {
  const double dt = 8e-6, w = 7.0 / 500;
  const auto tapers = compute_dpss({500, w}, 4);
  std::vector<double> shifts;
  for (int p = 0; p < 6; ++p) shifts.push_back(kTwoPi * 1750.0 * p);
  const double level = 3e-4;
  const PsdModel flat(Flat{level, kTwoPi * 60000.0});
  std::vector<std::vector<TaperChannel>> channels(shifts.size());
  for (std::size_t p = 0; p < shifts.size(); ++p) {
    for (const auto& t : tapers) {
      const Channel c = dpss_channel(t, dt, w, shifts[p]);
      TaperChannel ch;
      ch.estimate.omega_s = shifts[p];
      ch.estimate.value = expected_estimate(flat, c.filter, c.pb);
      ch.estimate.variance = 1e-12;
      ch.estimate.area = c.pb.area;
      ch.broadband_row = broadband_bias_row(shifts, c.pb, c.filter);
      ch.local_moment = local_bias_moment(c.pb, c.filter);
      channels[p].push_back(ch);
    }
  }
  const auto m = adaptive_multitaper(shifts, channels);
  ASSERT_EQ(m.size(), shifts.size());
  for (const auto& r : m) {
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 10);
    EXPECT_NEAR(r.value / level, 1.0, 0.02) << r.omega_s;
    EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Estimation, FisherForms) {
  const std::vector<double> a{1.0, 2.0, 0.0};
  const auto f = fisher_information_passband(a, 100, 0.5);
  EXPECT_NEAR(f[0], 100 * 1.0 / 0.5, 1e-12);
  EXPECT_NEAR(f[1], 100 * 4.0 / 0.5, 1e-12);
  EXPECT_EQ(f[2], 0.0);
  const auto c = fisher_covariance_term(a, 0.9);
  EXPECT_NEAR(c[1], 0.5 * std::pow(2.0 * 0.8 / 0.09, 2), 1e-9);
}

TEST(Estimation, InterpolationWeightsNormalize) {
  const std::vector<double> values{1.0, 3.0}, variances{0.1, 0.2}, centres{0.5, 1.5};
  const std::vector<std::vector<double>> info{{1.0, 1.0}, {0.0, 2.0}};
  const auto r = interpolated_estimate(values, variances, info, centres);
  EXPECT_DOUBLE_EQ(r.spectrum.value[0], 2.0);
  EXPECT_DOUBLE_EQ(r.spectrum.value[1], 3.0);
  EXPECT_NEAR(r.spectrum.std_dev[0], std::sqrt(0.25 * 0.1 + 0.25 * 0.2), 1e-15);
}

TEST(Estimation, SignificanceAgainstGridMean) {
  const std::vector<double> v{1.0, 1.0, 4.0}, s{1.0, 1.0, 2.0};
  const auto r = significance_test(v, s);
  EXPECT_DOUBLE_EQ(r.null_mean, 2.0);
  EXPECT_DOUBLE_EQ(r.z[2], 1.0);
  EXPECT_NEAR(passband_sigma_bound(100, 2.0), 1.0 / std::sqrt(1600.0), 1e-15);
}
