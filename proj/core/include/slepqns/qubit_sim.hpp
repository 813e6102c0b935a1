#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "slepqns/filter.hpp"
#include "slepqns/noise_model.hpp"
#include "slepqns/random.hpp"
#include "slepqns/waveform.hpp"

namespace slepqns {

enum class Axis { kX, kY, kZ };

// How the measured survival probability is turned into the signal S(T).
//   kLinear: S = 1 - P, the first-order estimator.
//   kGaussianInversion: S = -ln(2P - 1) / 2, exact for Gaussian a_x since
//   <cos^2 a> = (1 + exp(-2 <a^2>)) / 2.
enum class SignalModel { kLinear, kGaussianInversion };

enum class ShotPath { kSpectral, kTrajectory };

std::string to_string(Axis a);
Axis parse_axis(const std::string& name);
std::string to_string(SignalModel m);
SignalModel parse_signal_model(const std::string& name);

struct ExperimentConfig {
  Waveform waveform;
  PsdModel model;
  int shots = 1;
  int oversampling = 8;
  int block_factor = 4;
  std::uint64_t seed = 0;
  std::vector<Axis> axes{Axis::kZ};
  SignalModel signal_model = SignalModel::kLinear;
  ShotPath path = ShotPath::kSpectral;
  int threads = 1;

  void validate() const;
};

struct AxisCounts {
  Axis axis = Axis::kZ;
  int shots = 0;
  int up = 0;
  double p_hat() const { return shots > 0 ? static_cast<double>(up) / shots : 0.0; }
};

struct ExperimentResult {
  std::string label;
  std::vector<AxisCounts> counts;
  SignalModel signal_model = SignalModel::kLinear;
  double signal = 0.0;  // S(T) estimate
  double sigma2 = 0.0;  // per-shot variance proxy; var[S] = sigma2 / shots
  int shots = 0;
  std::uint64_t seed = 0;
  bool saturated = false;        // inversion clamped because P <= 1/2
  bool aliasing_warning = false;

  double variance() const { return shots > 0 ? sigma2 / shots : 0.0; }
};

// a_x = (1/2) sum_n Omega_n * (Riemann sum of beta over segment n).
double error_angle(const Waveform& w, const NoiseTrajectory& traj);

// Per-shot error angles for one waveform and PSD.  Both paths consume the
// same random bins; the spectral path projects them onto the transform of
// the segment weights g_i = Omega_{i / os} dt_noise instead of
// materializing the trajectory.
class ShotEngine {
 public:
  ShotEngine(const Waveform& w, const PsdModel& model, int oversampling = 8, int block_factor = 4);

  double error_angle(Rng& rng, ShotPath path = ShotPath::kSpectral) const;
  // <a_x^2> of the discrete synthesis model (exact for the simulator).
  double error_variance() const;
  const SpectralSynthesizer& synthesizer() const { return synth_; }
  bool aliasing_warning() const { return synth_.aliasing_warning(); }

 private:
  Waveform waveform_;
  int oversampling_;
  SpectralSynthesizer synth_;
  std::vector<int> active_;                      // bins with nonzero scale
  std::vector<std::complex<double>> projection_;  // transform of g at active bins
  std::vector<double> multiplicity_;              // 1 at DC and Nyquist, else 2
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Signal and per-shot variance from counts under the chosen model.
ExperimentResult summarize_counts(std::vector<AxisCounts> counts, SignalModel model);

// (1/2pi) * integral of S F over the real line.
double expected_signal(const PsdModel& model, const Waveform& w, const IntegrationOptions& options = {});
double expected_signal(const PsdModel& model, const FilterCurve& filter, const IntegrationOptions& options = {});

// Expected linear-model signal 1 - <cos^2 a> = (1 - exp(-2 v)) / 2 for
// Gaussian a_x with variance v.
double survival_signal(double error_variance);

}  // namespace slepqns
