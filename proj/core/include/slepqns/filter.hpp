#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "slepqns/waveform.hpp"

namespace slepqns {

struct IntegrationOptions {
  // Broadband integrals run to cutoff_factor * omega_N, rounded up to a whole
  // number of 2 omega_N periods, plus an asymptotic tail estimate.
  double cutoff_factor = 8.0;
  bool tail_correction = true;
  int points_per_lobe = 64;  // initial Simpson density per 2pi/T
  double rel_tol = 1e-8;
  int max_refinements = 4;
};

// F(omega) = s(omega, dt) * sum_t weight_t |DTFT_t(omega dt)|^2 with the
// envelope s = sin^2(omega dt / 2) / omega^2.  A single waveform gives its
// amplitude filter; weighted sums give CS and effective multitaper filters.
class FilterCurve {
 public:
  FilterCurve() = default;
  explicit FilterCurve(const Waveform& w);

  // Sum of weight_i * F_i; all inputs must share dt.
  static FilterCurve combine(std::span<const FilterCurve> filters, std::span<const double> weights);

  double operator()(double omega) const;
  double dtft_power(double omega) const;  // |Omega~(omega)|^2 (no envelope)
  double dt() const { return dt_; }
  double nyquist() const;
  int length() const { return static_cast<int>(autocorr_.size()); }
  bool empty() const { return terms_.empty(); }

  // Exact integral of F over [0, inf): (pi/4) * sum_t weight_t * power_t.
  double half_line_area() const;
  double cutoff(const IntegrationOptions& options = {}) const;

  // Integral of F(omega) g(omega) over [lo, hi]; hi = +inf integrates to the
  // cutoff and adds the tail estimate when enabled.
  double integrate(const std::function<double(double)>& g, double lo, double hi,
                   const IntegrationOptions& options = {}) const;
  double integrate(double lo, double hi, const IntegrationOptions& options = {}) const;

  // Tail of the integral of F g beyond c (c a multiple of 2pi/dt), using the
  // Fourier coefficients of sin^2(theta/2) |Omega~(theta)|^2 and the
  // asymptotic expansion of the sine integral.
  double tail_integral(const std::function<double(double)>& g, double c) const;

 private:
  struct Term {
    double weight;
    std::vector<double> omega;
  };
  struct Table;
  std::shared_ptr<const Table> table(int level, const IntegrationOptions& options) const;
  double integrate_finite(const std::function<double(double)>& g, double lo, double hi,
                          const IntegrationOptions& options) const;

  std::vector<Term> terms_;
  double dt_ = 0.0;
  std::vector<double> autocorr_;  // weighted R_l, l = 0..N-1
  struct Cache;
  std::shared_ptr<Cache> cache_;
};

double filter_eval(const Waveform& w, double omega);

struct PassbandSpec {
  double center = 0.0;      // omega_s
  double half_width = 0.0;  // 2 pi W / dt
  double lo = 0.0;          // a
  double hi = 0.0;          // b
  double area = 0.0;        // (1/pi) * integral of F over [a, b]
};

// a = 0 when omega_s <= 2piW/dt, otherwise omega_s - 2piW/dt; b = omega_s + 2piW/dt.
PassbandSpec passband_bounds(double omega_s, double w, double dt);
PassbandSpec passband(const FilterCurve& filter, double omega_s, double w, double dt,
                      const IntegrationOptions& options = {});

// A_q = (1/pi) * integral of F over [(q-1) d_omega, q d_omega], q = 1..Q.
std::vector<double> segment_areas(const FilterCurve& filter, double d_omega, int q,
                                  const IntegrationOptions& options = {});

// [sin^2(omega R T_B / 2) / sin^2(omega T_B / 2)] F_base(omega), R^2 F_base at harmonics.
double comb_filter(const Waveform& base, int repetitions, double omega);
double comb_filter(const FilterCurve& base, double base_duration, int repetitions, double omega);

// min{2 n_seq pi / T_B, pi / dt_gcf}, dt_gcf the greatest common divisor of
// the durations found on a rational grid with bounded denominators.
double effective_nyquist(std::span<const double> segment_durations, int n_seq, double base_duration,
                         long long max_denominator = 1000000, double rel_tol = 1e-9);

void write_filter_csv(const FilterCurve& filter, std::span<const double> omega, std::ostream& out);

}  // namespace slepqns
