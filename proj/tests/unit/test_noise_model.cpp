#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "slepqns/errors.hpp"
#include "slepqns/noise_model.hpp"

using namespace slepqns;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST(NoiseModel, LorentzianIsEvenWithPeakAtCenter) {
  const PsdModel m(Lorentzian{4e-4, kTwoPi * 4620.0, kTwoPi * 1110.0});
  EXPECT_DOUBLE_EQ(m(kTwoPi * 3000.0), m(-kTwoPi * 3000.0));
  EXPECT_GT(m(kTwoPi * 4620.0), m(kTwoPi * 4000.0));
  EXPECT_GT(m(kTwoPi * 4620.0), m(kTwoPi * 5200.0));
}

TEST(NoiseModel, WhitePlusLineVanishesBeyondCutoff) {
  const PsdModel m(WhitePlusLine{2e-4, {4e-3, kTwoPi * 7960.0, kTwoPi * 80.0}, kTwoPi * 17500.0});
  EXPECT_GT(m(kTwoPi * 17000.0), 0.0);
  EXPECT_EQ(m(kTwoPi * 18000.0), 0.0);
  EXPECT_GT(m(kTwoPi * 7960.0), 10.0 * m(kTwoPi * 6000.0));
}

TEST(NoiseModel, GaussianMixAddsPeaks) {
  const GaussianPeak a{0.5e-3, 0.0, kTwoPi * 3500.0}, b{0.35e-3, kTwoPi * 23900.0, kTwoPi * 6210.0};
  const PsdModel both(GaussianMix{{a, b}}), first(GaussianMix{{a}}), second(GaussianMix{{b}});
  for (double f : {0.0, 5000.0, 23900.0}) EXPECT_NEAR(both(kTwoPi * f), first(kTwoPi * f) + second(kTwoPi * f), 1e-18);
}

TEST(NoiseModel, ClosedFormVarianceMatchesQuadrature) {
  const PsdModel models[] = {
      PsdModel(Lorentzian{4e-4, kTwoPi * 4620.0, kTwoPi * 1110.0}),
      PsdModel(GaussianMix{{{0.5e-3, 0.0, kTwoPi * 3500.0}, {0.35e-3, kTwoPi * 23900.0, kTwoPi * 6210.0}}}),
      PsdModel(WhitePlusLine{2e-4, {4e-3, kTwoPi * 7960.0, kTwoPi * 80.0}, kTwoPi * 17500.0}),
      PsdModel(Flat{1e-4, kTwoPi * 1000.0})};
  for (const auto& m : models) {
    const double limit = m.kind() == "lorentzian" ? kTwoPi * 1e9 : kTwoPi * 2e5;
    EXPECT_NEAR(m.band_variance(limit) / m.variance(), 1.0, m.kind() == "lorentzian" ? 1e-5 : 1e-8) << m.kind();
  }
  EXPECT_TRUE(std::isinf(PsdModel(Flat{1e-4}).variance()));
  EXPECT_TRUE(PsdModel(Flat{0.0}).is_zero());
}

TEST(NoiseModel, SynthesisIsReproducibleAndSeedSensitive) {
  const PsdModel m(Lorentzian{4e-4, kTwoPi * 4620.0, kTwoPi * 1110.0});
  const auto a = synthesize(m, 5e-7, 2e-3, 42), b = synthesize(m, 5e-7, 2e-3, 42), c = synthesize(m, 5e-7, 2e-3, 43);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  EXPECT_EQ(a.samples.size(), 4000u);
}

TEST(NoiseModel, SampleVarianceMatchesDiscreteModel) {
  const PsdModel m(Lorentzian{4e-4, kTwoPi * 4620.0, kTwoPi * 1110.0});
  const SpectralSynthesizer s(m, 5e-7, 4000);
  double sum2 = 0.0;
  long count = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto t = s.realize(seed);
    for (std::size_t i = 0; i < t.samples.size(); i += 50) sum2 += t.samples[i] * t.samples[i], ++count;
  }
  // 300 independent trajectories; samples within one are correlated, so the
  // tolerance is loose.
  EXPECT_NEAR(sum2 / count / s.sample_variance(), 1.0, 0.1);
  // The discrete model captures nearly all of the continuous variance here.
  EXPECT_NEAR(s.sample_variance() / m.band_variance(std::numbers::pi / 5e-7), 1.0, 0.05);
}

TEST(NoiseModel, AliasingWarningForUnderResolvedModels) {
  const PsdModel wide(Lorentzian{4e-4, kTwoPi * 4620.0, kTwoPi * 1110.0});
  EXPECT_TRUE(SpectralSynthesizer(wide, 1e-3, 64).aliasing_warning());
  EXPECT_FALSE(SpectralSynthesizer(PsdModel(Flat{0.0}), 1e-3, 64).aliasing_warning());
}
