#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "slepqns/estimation.hpp"
#include "slepqns/filter.hpp"
#include "slepqns/qubit_sim.hpp"
#include "slepqns/slepian.hpp"
#include "slepqns/waveform.hpp"

using namespace slepqns;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Waveform cos_waveform(const Taper& t, double dt, double f_hz) {
  return normalize_power(modulate(dpss_waveform(t, 1.0, dt), Modulation::kCos, kTwoPi * f_hz), 900.0);
}

// Tapers 0..2NW-1 for N = arg, NW = 7.
void BM_ComputeDpss(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const DpssParams params{n, 7.0 / n};
  for (auto _ : state) benchmark::DoNotOptimize(compute_dpss(params, 13));
}
BENCHMARK(BM_ComputeDpss)->Arg(128)->Arg(500)->Arg(1600)->Unit(benchmark::kMillisecond);

// Filter table construction plus one passband area.
void BM_FilterPassband(benchmark::State& state) {
  const auto taper = compute_dpss({500, 0.002}, 0)[0];
  const Waveform w = cos_waveform(taper, 4e-6, 4500.0);
  for (auto _ : state) {
    const FilterCurve f(w);
    benchmark::DoNotOptimize(passband(f, kTwoPi * 4500.0, 0.002, 4e-6).area);
  }
}
BENCHMARK(BM_FilterPassband)->Unit(benchmark::kMillisecond);

// One simulated shot on the spectral path, N = 500 at 8x oversampling.
void BM_Shot(benchmark::State& state) {
  const auto taper = compute_dpss({500, 0.002}, 0)[0];
  const ShotEngine engine(cos_waveform(taper, 4e-6, 4500.0), PsdModel(Lorentzian{4e-4, kTwoPi * 4620, kTwoPi * 1110}));
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(engine.error_angle(rng));
}
BENCHMARK(BM_Shot)->Unit(benchmark::kMicrosecond);

// Adaptive multitaper over 9 shifts and 13 tapers on expected eigenestimates.
void BM_AdaptiveMultitaper(benchmark::State& state) {
  const double dt = 8e-6, w = 0.014;
  const auto tapers = compute_dpss({500, w}, 12);
  const PsdModel model(WhitePlusLine{2e-4, Lorentzian{4e-3, kTwoPi * 7960, kTwoPi * 80}, kTwoPi * 17500});
  std::vector<double> shifts;
  for (int p = 0; p < 9; ++p) shifts.push_back(kTwoPi * 1750.0 * p);
  std::vector<std::vector<TaperChannel>> channels(shifts.size());
  for (std::size_t p = 0; p < shifts.size(); ++p) {
    for (const auto& t : tapers) {
      const FilterCurve f(cos_waveform(t, dt, shifts[p] / kTwoPi));
      const PassbandSpec pb = passband(f, shifts[p], w, dt);
      TaperChannel ch;
      ch.estimate.omega_s = shifts[p];
      ch.estimate.value = expected_estimate(model, f, pb);
      ch.estimate.variance = 1e-12;
      ch.estimate.area = pb.area;
      ch.broadband_row = broadband_bias_row(shifts, pb, f);
      ch.local_moment = local_bias_moment(pb, f);
      channels[p].push_back(std::move(ch));
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(adaptive_multitaper(shifts, channels));
}
BENCHMARK(BM_AdaptiveMultitaper)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
