#include "slepqns/slepian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "quadrature.hpp"
#include "slepqns/errors.hpp"
#include "tridiagonal.hpp"

namespace slepqns {

namespace {

constexpr double kPi = std::numbers::pi;

detail::SymTridiagonal commuting_matrix(const DpssParams& p) {
  const int n = p.n;
  detail::SymTridiagonal t;
  t.d.resize(n);
  t.e.resize(n > 0 ? n - 1 : 0);
  const double c = std::cos(2.0 * kPi * p.w);
  for (int i = 0; i < n; ++i) {
    const double x = 0.5 * (n - 1 - 2.0 * i);
    t.d[i] = x * x * c;
  }
  for (int i = 1; i < n; ++i) t.e[i - 1] = 0.5 * i * (n - i);
  return t;
}

void apply_sign_convention(Taper& taper) {
  const int n = taper.length();
  const double centre = 0.5 * (n - 1);
  double s = 0.0;
  if (taper.order % 2 == 0) {
    for (double v : taper.values) s += v;
  } else {
    for (int i = 0; i < n; ++i) s += (i - centre) * taper.values[i];
  }
  if (s < 0.0) {
    for (double& v : taper.values) v = -v;
  }
}

// Points per main-lobe width 2pi/N used to seed the refined quadratures.
constexpr int kPointsPerLobe = 64;
constexpr double kQuadTol = 1e-8;

}  // namespace

void DpssParams::validate() const {
  if (n < 1) throw ParameterError("DPSS length N must be positive");
  if (!(w > 0.0) || !(w < 0.5)) throw ParameterError("DPSS bandwidth W must lie in (0, 0.5)");
  if (2.0 * n * w < 1.0 - 1e-9) throw ParameterError("DPSS parameters need 2NW >= 1");
}

int shannon_number(const DpssParams& params) {
  params.validate();
  return static_cast<int>(std::floor(2.0 * params.n * params.w + 1e-9));
}

double sinc_kernel_quotient(std::span<const double> v, double w) {
  const std::size_t n = v.size();
  std::vector<double> kernel(n);
  kernel[0] = 2.0 * w;
  for (std::size_t l = 1; l < n; ++l) {
    kernel[l] = std::sin(2.0 * kPi * w * static_cast<double>(l)) / (kPi * static_cast<double>(l));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = kernel[0] * v[i];
    for (std::size_t j = 0; j < i; ++j) row += 2.0 * kernel[i - j] * v[j];
    total += v[i] * row;
  }
  return total;
}

std::vector<Taper> compute_dpss(const DpssParams& params, int max_order) {
  params.validate();
  if (max_order < 0 || max_order >= params.n) {
    throw ParameterError("max_order must lie in [0, N-1], got " + std::to_string(max_order));
  }
  const detail::SymTridiagonal t = commuting_matrix(params);
  std::vector<Taper> tapers;
  std::vector<std::vector<double>> found;
  tapers.reserve(max_order + 1);
  for (int k = 0; k <= max_order; ++k) {
    const double mu = detail::eigenvalue_by_bisection(t, params.n - 1 - k);
    std::vector<double> v = detail::inverse_iteration(t, mu, found);
    found.push_back(v);
    Taper taper;
    taper.order = k;
    taper.values = std::move(v);
    apply_sign_convention(taper);
    taper.eigenvalue = sinc_kernel_quotient(taper.values, params.w);
    tapers.push_back(std::move(taper));
  }
  return tapers;
}

std::complex<double> centered_dtft(std::span<const double> x, double theta) {
  const std::size_t n = x.size();
  const double centre = 0.5 * (static_cast<double>(n) - 1.0);
  // Rotation recurrence, reseeded periodically to bound phase drift.
  constexpr std::size_t kReseed = 64;
  const std::complex<double> step(std::cos(theta), std::sin(theta));
  std::complex<double> sum(0.0, 0.0);
  std::complex<double> phase;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % kReseed == 0) {
      const double arg = theta * (static_cast<double>(i) - centre);
      phase = {std::cos(arg), std::sin(arg)};
    } else {
      phase *= step;
    }
    sum += x[i] * phase;
  }
  return sum;
}

double dpswf_eval(const Taper& taper, double dt, double omega) {
  const std::complex<double> z = centered_dtft(taper.values, omega * dt);
  return taper.order % 2 == 0 ? z.real() : -z.imag();
}

RhoK::RhoK(const DpssParams& params, double dt) : params_(params), dt_(dt) {
  const int k = shannon_number(params);
  if (k < 1) throw ParameterError("rho_K needs a Shannon number of at least 1");
  if (!(dt > 0.0)) throw ParameterError("sampling interval must be positive");
  tapers_ = compute_dpss(params, k - 1);
}

double RhoK::operator()(double omega) const {
  double s = 0.0;
  for (const Taper& t : tapers_) {
    const double u = dpswf_eval(t, dt_, omega);
    s += u * u;
  }
  return s / static_cast<double>(tapers_.size());
}

double rho_K(const DpssParams& params, double dt, double omega) {
  return RhoK(params, dt)(omega);
}

double concentration_ratio(const Taper& taper, double w) {
  const int n = taper.length();
  auto u2 = [&](double theta) {
    const double u = dpswf_eval(taper, 1.0, theta);
    return u * u;
  };
  // Band integral over [0, 2piW] doubled by parity of U^2.
  const int band_panels = std::max(8, static_cast<int>(std::ceil(kPointsPerLobe * n * w)));
  const auto band = detail::refined_trapezoid(u2, 0.0, 2.0 * kPi * w, band_panels, kQuadTol, 12, true);
  // U^2 is a trigonometric polynomial of degree N-1, so the periodic
  // trapezoid rule is exact once the half-period carries N panels.
  const int full_panels = std::max(16, n);
  const auto full = detail::refined_trapezoid(u2, 0.0, kPi, full_panels, kQuadTol, 6, true);
  if (!band.converged || !full.converged) {
    throw NumericError("concentration quadrature did not converge");
  }
  return band.value / full.value;
}

double rho_l1_distance(const DpssParams& params, double dt) {
  const RhoK rho(params, 1.0);
  const double ideal = 1.0 / (2.0 * params.w);
  const double edge = 2.0 * kPi * params.w;
  const int panels = std::max(8, static_cast<int>(std::ceil(kPointsPerLobe * params.n * params.w)));
  const auto inside = detail::refined_trapezoid([&](double th) { return std::abs(rho(th) - ideal); },
                                                0.0, edge, panels, 1e-7, 8, false);
  const auto mass = detail::refined_trapezoid([&](double th) { return rho(th); }, 0.0, edge, panels,
                                              kQuadTol, 12, true);
  // The principal-domain integral of rho_K is 2pi (theta units), so the
  // out-of-band mass is the complement of the in-band mass.
  const double theta_distance = 2.0 * inside.value + (2.0 * kPi - 2.0 * mass.value);
  return theta_distance / dt;
}

}  // namespace slepqns
