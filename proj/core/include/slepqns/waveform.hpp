#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slepqns/slepian.hpp"

namespace slepqns {

// Piecewise-constant amplitude Omega_n (rad/s) on [n dt, (n+1) dt).
struct Waveform {
  std::vector<double> omega;
  double dt = 0.0;
  std::string label;

  int size() const { return static_cast<int>(omega.size()); }
  double duration() const { return dt * static_cast<double>(omega.size()); }
  double rotation_angle() const;  // Theta(T) = dt * sum Omega_n
  double power() const;           // integral of Omega^2 = dt * sum Omega_n^2
};

enum class Modulation { kNone, kCos, kSin, kSsb };

Modulation parse_modulation(const std::string& name);
std::string to_string(Modulation m);

Waveform dpss_waveform(const Taper& taper, double scale, double dt);

// Carrier modulation at omega_s in [0, 2pi/dt).
Waveform modulate(const Waveform& w, Modulation mode, double omega_s);

// COS and SIN members of a CS pair built from one taper.
std::pair<Waveform, Waveform> cs_pair(const Taper& taper, double scale, double dt, double omega_s);

Waveform normalize_power(const Waveform& w, double target);

// Scales both members by one factor so their summed power equals target.
std::pair<Waveform, Waveform> normalize_pair_power(const std::pair<Waveform, Waveform>& pair, double target);

// Throws ParameterError when any |Omega_n| exceeds the cap.
void enforce_amplitude_cap(const Waveform& w, double cap);

// Flat-top +/-amplitude sequence of total time `duration` on N samples with
// sign switches at (2j-1) T / (2n), j = 1..n.
Waveform cpmg_rse(int switches, double amplitude, double duration, int n);

Waveform repeat_base(const Waveform& w, int repetitions);

// Discrete Hilbert transform through the analytic signal on a zero-padded
// transform of length >= 4N.
std::vector<double> hilbert_transform(std::span<const double> x);

struct SsqmOptions {
  int grid_points = 512;
  int random_starts = 8;
  double leakage_weight = 0.0;  // weight on 1 - sum c_k^2 lambda_k
  int max_iterations = 4000;
};

struct SsqmCoefficients {
  std::vector<double> c;
  double cost = 0.0;        // cost at c
  double start_cost = 0.0;  // cost at the uniform start c_k = 1/sqrt(K)
  bool optimizer_failed = false;
};

// In-band integrated squared error between |sum_k c_k v^(k)|^2 in the DTFT
// domain and the ideal level 1/(2W), evaluated in normalized frequency
// theta = omega dt on a midpoint grid over |theta| < 2 pi W.
double ssqm_cost(std::span<const Taper> tapers, double w, std::span<const double> c,
                 const SsqmOptions& options = {});

SsqmCoefficients ssqm_coefficients(const DpssParams& params, double dt, int k, std::uint64_t seed,
                                   const SsqmOptions& options = {});

// Omega_n = scale * sum_k c_k v_n^(k).
Waveform ssqm_waveform(std::span<const Taper> tapers, std::span<const double> c, double scale, double dt);

void write_waveform_csv(const Waveform& w, std::ostream& out);

}  // namespace slepqns
