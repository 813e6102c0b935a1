#pragma once

#include <complex>
#include <span>
#include <vector>

namespace slepqns {

struct DpssParams {
  int n = 0;       // sequence length N
  double w = 0.0;  // half-bandwidth in cycles per sample

  void validate() const;
};

struct Taper {
  int order = 0;
  std::vector<double> values;
  double eigenvalue = 0.0;

  int length() const { return static_cast<int>(values.size()); }
};

// floor(2NW), tolerant of the rounding in products such as 2 * 500 * (1/500).
int shannon_number(const DpssParams& params);

// Tapers of orders 0..max_order from the tridiagonal commuting matrix.
// Eigenvalues are Rayleigh quotients of the sinc kernel. Even orders have a
// positive sum; odd orders have a positive first moment about the centre.
std::vector<Taper> compute_dpss(const DpssParams& params, int max_order);

// Rayleigh quotient v^T K v of the sinc kernel K_nm = sin(2piW(n-m))/(pi(n-m)).
double sinc_kernel_quotient(std::span<const double> v, double w);

// Phase-centred DTFT sum_n x_n exp(i theta (n - (N-1)/2)).
std::complex<double> centered_dtft(std::span<const double> x, double theta);

// Real DPSWF U^(k)(omega) for a taper sampled at spacing dt.
double dpswf_eval(const Taper& taper, double dt, double omega);

// Average of squared DPSWFs over the first K = shannon_number tapers.
class RhoK {
 public:
  RhoK(const DpssParams& params, double dt);

  double operator()(double omega) const;
  int count() const { return static_cast<int>(tapers_.size()); }
  double dt() const { return dt_; }
  const DpssParams& params() const { return params_; }

 private:
  DpssParams params_;
  double dt_;
  std::vector<Taper> tapers_;
};

double rho_K(const DpssParams& params, double dt, double omega);

// Integral of U^2 over the band |omega| < 2piW/dt divided by its integral
// over the principal domain, both by refined quadrature.  The ratio does
// not depend on dt.
double concentration_ratio(const Taper& taper, double w);

// L1 distance between rho_K and the ideal filter (1/2W) on |omega| < 2piW/dt,
// measured over the principal domain in rad/s.
double rho_l1_distance(const DpssParams& params, double dt);

}  // namespace slepqns
