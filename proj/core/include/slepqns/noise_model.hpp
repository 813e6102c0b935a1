#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "slepqns/random.hpp"

namespace slepqns {

// All PSD parameters are in SI: amplitudes in s (1/Hz), frequencies in rad/s.
struct Lorentzian {
  double amplitude = 0.0;  // C
  double center = 0.0;     // p
  double width = 1.0;      // w_p
};

struct GaussianPeak {
  double amplitude = 0.0;
  double center = 0.0;
  double sigma = 1.0;
};

struct GaussianMix {
  std::vector<GaussianPeak> peaks;
};

struct WhitePlusLine {
  double floor = 0.0;  // s0
  Lorentzian line;
  double cutoff = 0.0;  // omega_c; the PSD vanishes for |omega| > cutoff
};

// Flat spectrum, optionally band-limited; level 0 is the noiseless model.
struct Flat {
  double level = 0.0;
  double cutoff = std::numeric_limits<double>::infinity();
};

using PsdVariant = std::variant<Flat, Lorentzian, GaussianMix, WhitePlusLine>;

class PsdModel {
 public:
  PsdModel() = default;
  PsdModel(PsdVariant v);  // NOLINT(google-explicit-constructor)

  // Every variant is evaluated at |omega|, which makes S even.
  double operator()(double omega) const;
  const PsdVariant& variant() const { return v_; }
  std::string kind() const;
  bool is_zero() const;

  // Closed-form (1/2pi) * integral of S over the real line; infinite for an
  // unbounded flat spectrum.
  double variance() const;
  // (1/2pi) * integral of S over |omega| < limit, by quadrature.
  double band_variance(double limit) const;
  // Largest frequency with appreciable weight (for grids and sanity checks).
  double support_hint() const;

 private:
  PsdVariant v_{Flat{}};
};

double psd_eval(const PsdModel& model, double omega);

struct NoiseTrajectory {
  std::vector<double> samples;  // beta at t_i = (i + 1/2) dt
  double dt = 0.0;
  double duration = 0.0;
  std::uint64_t seed = 0;
  bool aliasing_warning = false;
};

// Frequency-domain Gaussian synthesis on a block of length L >= block_factor
// times the trajectory.  Bin j carries a complex amplitude with
// E|a_j|^2 = S(2 pi j / (L dt)) / (L dt), Hermitian-extended, so the samples
// have exactly the autocovariance sum_j E|a_j|^2 exp(2 pi i j l / L).
class SpectralSynthesizer {
 public:
  SpectralSynthesizer(const PsdModel& model, double dt, int samples, int block_factor = 4);

  int samples() const { return samples_; }
  int block_length() const { return block_; }
  double dt() const { return dt_; }
  double bin_spacing() const;
  std::span<const double> bin_scale() const { return scale_; }
  bool aliasing_warning() const { return aliasing_warning_; }
  // Discrete-model variance of every sample.
  double sample_variance() const;

  // Draws the half spectrum a_0..a_{L/2}; bins with zero scale consume no
  // random numbers.
  void draw_bins(Rng& rng, std::span<std::complex<double>> bins) const;
  NoiseTrajectory realize(std::uint64_t seed) const;

 private:
  double dt_;
  int samples_;
  int block_;
  std::vector<double> scale_;
  bool aliasing_warning_ = false;
};

NoiseTrajectory synthesize(const PsdModel& model, double dt, double duration, std::uint64_t seed,
                           int block_factor = 4);

}  // namespace slepqns
