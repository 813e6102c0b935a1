#include "slepqns/filter.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <ostream>

#include "fft.hpp"
#include "slepqns/errors.hpp"

namespace slepqns {
namespace {

constexpr double kPi = std::numbers::pi;

double envelope(double omega, double dt) {
  if (omega == 0.0) return 0.25 * dt * dt;
  const double s = std::sin(0.5 * omega * dt);
  return s * s / (omega * omega);
}

// Weighted autocorrelation sum_n x_n x_{n+l}, l = 0..n-1, via a padded transform.
std::vector<double> autocorrelation(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  const int len = static_cast<int>(std::bit_ceil(static_cast<unsigned>(2 * n)));
  detail::RealFft fft(len);
  std::vector<double> padded(len, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(padded, spec);
  for (auto& z : spec) z = std::norm(z);
  fft.inverse(spec, padded);
  std::vector<double> r(n);
  for (int l = 0; l < n; ++l) r[l] = padded[l] / len;
  return r;
}

template <class F>
double gauss_legendre(F&& f, double lo, double hi) {
  return boost::math::quadrature::gauss<double, 10>::integrate(f, lo, hi);
}

}  // namespace

struct FilterCurve::Table {
  int length = 0;    // L, a power of two
  double step = 0;   // h = 2 pi / (L dt)
  std::vector<double> weighted;  // sin^2(pi j / L) |Omega~(2 pi j / L)|^2, j < L
  double at_zero = 0;            // F(0) = (dt^2 / 4) |Omega~(0)|^2
};

struct FilterCurve::Cache {
  std::mutex mutex;
  std::map<int, std::shared_ptr<const Table>> tables;
};

FilterCurve::FilterCurve(const Waveform& w) : dt_(w.dt), cache_(std::make_shared<Cache>()) {
  if (!(w.dt > 0.0)) throw ParameterError("filter needs a positive sampling interval");
  if (w.omega.empty()) throw ParameterError("filter needs a non-empty waveform");
  terms_.push_back({1.0, w.omega});
  autocorr_ = autocorrelation(w.omega);
}

FilterCurve FilterCurve::combine(std::span<const FilterCurve> filters, std::span<const double> weights) {
  if (filters.size() != weights.size() || filters.empty())
    throw ParameterError("combine needs one weight per filter");
  FilterCurve out;
  out.dt_ = filters.front().dt_;
  out.cache_ = std::make_shared<Cache>();
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const FilterCurve& f = filters[i];
    if (f.empty()) throw ParameterError("cannot combine an empty filter");
    if (std::abs(f.dt_ - out.dt_) > 1e-12 * out.dt_)
      throw ParameterError("combined filters must share the sampling interval");
    if (out.autocorr_.size() < f.autocorr_.size()) out.autocorr_.resize(f.autocorr_.size(), 0.0);
    for (std::size_t l = 0; l < f.autocorr_.size(); ++l) out.autocorr_[l] += weights[i] * f.autocorr_[l];
    for (const Term& t : f.terms_) out.terms_.push_back({weights[i] * t.weight, t.omega});
  }
  return out;
}

double FilterCurve::nyquist() const { return kPi / dt_; }

double FilterCurve::dtft_power(double omega) const {
  double theta = std::fmod(std::abs(omega * dt_), 2.0 * kPi);
  if (theta > kPi) theta = 2.0 * kPi - theta;
  double p = 0.0;
  for (const Term& t : terms_) p += t.weight * std::norm(centered_dtft(t.omega, theta));
  return p;
}

double FilterCurve::operator()(double omega) const { return envelope(omega, dt_) * dtft_power(omega); }

double FilterCurve::half_line_area() const {
  // sum_t weight_t * dt * sum_n Omega_n^2 equals dt * R_0.
  return 0.25 * kPi * dt_ * (autocorr_.empty() ? 0.0 : autocorr_[0]);
}

double FilterCurve::cutoff(const IntegrationOptions& options) const {
  const double period = 2.0 * nyquist();
  return period * std::max(1.0, std::ceil(0.5 * options.cutoff_factor));
}

std::shared_ptr<const FilterCurve::Table> FilterCurve::table(int level, const IntegrationOptions& options) const {
  const long long base = static_cast<long long>(std::max(options.points_per_lobe, 8)) *
                         std::max<long long>(length(), 1);
  const long long length = static_cast<long long>(std::bit_ceil(static_cast<unsigned long long>(base))) << level;
  if (length > (1LL << 28)) throw NumericError("filter table would exceed the size limit");
  const int len = static_cast<int>(length);

  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto it = cache_->tables.find(len);
  if (it != cache_->tables.end()) return it->second;

  auto tab = std::make_shared<Table>();
  tab->length = len;
  tab->step = 2.0 * kPi / (len * dt_);
  std::vector<double> r(len, 0.0);
  r[0] = autocorr_[0];
  for (std::size_t l = 1; l < autocorr_.size(); ++l) {
    r[l] = autocorr_[l];
    r[len - l] = autocorr_[l];
  }
  detail::RealFft fft(len);
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(r, spec);
  tab->weighted.resize(len);
  for (int j = 0; j < len; ++j) {
    const int m = j <= len / 2 ? j : len - j;
    const double s = std::sin(kPi * j / len);
    tab->weighted[j] = s * s * std::max(spec[m].real(), 0.0);
  }
  tab->at_zero = 0.25 * dt_ * dt_ * std::max(spec[0].real(), 0.0);
  cache_->tables.emplace(len, tab);
  return tab;
}

double FilterCurve::integrate_finite(const std::function<double(double)>& g, double lo, double hi,
                                     const IntegrationOptions& options) const {
  if (!(hi > lo)) return 0.0;
  auto fg = [&](double w) { return (*this)(w) * g(w); };
  double result = 0.0;
  for (int level = 0; level <= options.max_refinements; ++level) {
    const auto tab = table(level, options);
    const double h = tab->step;
    const long long j0 = 8 * static_cast<long long>(std::ceil(lo / (8.0 * h)));
    const long long j1 = 8 * static_cast<long long>(std::floor(hi / (8.0 * h)));
    if (j1 - j0 < 16) {
      // Too narrow for the grid: panels of width <= 8h with direct evaluation.
      const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / (8.0 * h))));
      const double width = (hi - lo) / panels;
      double sum = 0.0;
      for (int i = 0; i < panels; ++i) sum += gauss_legendre(fg, lo + i * width, lo + (i + 1) * width);
      return sum;
    }
    const long long mask = tab->length - 1;
    double s1 = 0.0, s2 = 0.0, s4 = 0.0, abs_sum = 0.0;
    for (long long j = j0; j <= j1; ++j) {
      const double w = static_cast<double>(j) * h;
      const double f = (j == 0 ? tab->at_zero : tab->weighted[j & mask] / (w * w)) * g(w);
      abs_sum += std::abs(f);
      const long long i = j - j0;
      const bool edge = (j == j0 || j == j1);
      s1 += f * (edge ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0));
      if (i % 2 == 0) s2 += f * (edge ? 1.0 : (i % 4 == 2 ? 4.0 : 2.0));
      if (i % 4 == 0) s4 += f * (edge ? 1.0 : (i % 8 == 4 ? 4.0 : 2.0));
    }
    s1 *= h / 3.0;
    s2 *= 2.0 * h / 3.0;
    s4 *= 4.0 * h / 3.0;
    const double r1 = s1 + (s1 - s2) / 15.0;
    const double r2 = s2 + (s2 - s4) / 15.0;
    const double ends = gauss_legendre(fg, lo, j0 * h) + gauss_legendre(fg, j1 * h, hi);
    result = r1 + ends;
    const double scale = std::max(abs_sum * h, std::abs(result));
    if (std::abs(r1 - r2) <= options.rel_tol * scale) return result;
  }
  return result;
}

double FilterCurve::tail_integral(const std::function<double(double)>& g, double c) const {
  const std::size_t n = autocorr_.size();
  auto r = [&](std::size_t l) { return l < n ? autocorr_[l] : 0.0; };
  const double q0 = 0.5 * r(0) - 0.5 * r(1);
  auto mapped = [&](double u) { return u <= 0.0 ? 0.0 : g(c / u); };
  double g_inf_part = 0.0;
  if (q0 != 0.0) {
    g_inf_part = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(mapped, 0.0, 1.0, 10, 1e-10);
  }
  double oscillating = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double qk = r(k) - 0.5 * r(k - 1) - 0.5 * r(k + 1);
    const double x = static_cast<double>(k) * c * dt_;
    const double inv_x2 = 1.0 / (x * x);
    // Asymptotic series sum_m (-1)^(m+1) (2m)! / x^(2m), cut at its smallest term.
    double term = 2.0 * inv_x2;
    double series = term;
    for (int m = 2; m <= 8; ++m) {
      const double next = -term * (2.0 * m) * (2.0 * m - 1.0) * inv_x2;
      if (std::abs(next) >= std::abs(term)) break;
      series += next;
      term = next;
    }
    oscillating += qk * series;
  }
  return (q0 * g_inf_part + g(c) * oscillating) / c;
}

double FilterCurve::integrate(const std::function<double(double)>& g, double lo, double hi,
                              const IntegrationOptions& options) const {
  if (terms_.empty()) return 0.0;
  if (lo < 0.0 || !(hi >= lo)) throw ParameterError("integration bounds must satisfy 0 <= lo <= hi");
  if (std::isfinite(hi)) return integrate_finite(g, lo, hi, options);
  double c = cutoff(options);
  if (lo > c) c = 2.0 * nyquist() * std::ceil(lo / (2.0 * nyquist()));
  double value = integrate_finite(g, lo, c, options);
  if (options.tail_correction) value += tail_integral(g, c);
  return value;
}

double FilterCurve::integrate(double lo, double hi, const IntegrationOptions& options) const {
  return integrate([](double) { return 1.0; }, lo, hi, options);
}

double filter_eval(const Waveform& w, double omega) {
  double theta = omega * w.dt;
  return envelope(omega, w.dt) * std::norm(centered_dtft(w.omega, theta));
}

PassbandSpec passband_bounds(double omega_s, double w, double dt) {
  if (!(dt > 0.0) || !(w > 0.0 && w < 0.5)) throw ParameterError("passband needs dt > 0 and 0 < W < 1/2");
  if (!(omega_s >= 0.0) || omega_s >= kPi / dt)
    throw ParameterError("shift frequency must lie in [0, omega_N)");
  PassbandSpec pb;
  pb.center = omega_s;
  pb.half_width = 2.0 * kPi * w / dt;
  pb.lo = omega_s <= pb.half_width ? 0.0 : omega_s - pb.half_width;
  pb.hi = omega_s + pb.half_width;
  return pb;
}

PassbandSpec passband(const FilterCurve& filter, double omega_s, double w, double dt,
                      const IntegrationOptions& options) {
  PassbandSpec pb = passband_bounds(omega_s, w, dt);
  pb.area = filter.integrate(pb.lo, pb.hi, options) / kPi;
  return pb;
}

std::vector<double> segment_areas(const FilterCurve& filter, double d_omega, int q,
                                  const IntegrationOptions& options) {
  if (!(d_omega > 0.0) || q < 1) throw ParameterError("segments need d_omega > 0 and Q >= 1");
  std::vector<double> areas(q);
  for (int i = 0; i < q; ++i) {
    areas[i] = std::max(0.0, filter.integrate(i * d_omega, (i + 1) * d_omega, options) / kPi);
  }
  return areas;
}

namespace {

double dirichlet_ratio(double omega, double base_duration, int repetitions) {
  const double x = 0.5 * omega * base_duration;
  const double eps = x - kPi * std::round(x / kPi);
  if (eps == 0.0) return static_cast<double>(repetitions) * repetitions;
  const double num = std::sin(repetitions * eps);
  const double den = std::sin(eps);
  return num * num / (den * den);
}

}  // namespace

double comb_filter(const Waveform& base, int repetitions, double omega) {
  if (repetitions < 1) throw ParameterError("comb needs R >= 1");
  return dirichlet_ratio(omega, base.duration(), repetitions) * filter_eval(base, omega);
}

double comb_filter(const FilterCurve& base, double base_duration, int repetitions, double omega) {
  if (repetitions < 1) throw ParameterError("comb needs R >= 1");
  return dirichlet_ratio(omega, base_duration, repetitions) * base(omega);
}

namespace {

struct Fraction {
  long long num;
  long long den;
};

// Best continued-fraction approximant of x in (0, 1] within rel_tol.
Fraction rational_approximation(double x, long long max_den, double rel_tol) {
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double rest = x;
  for (int iter = 0; iter < 64; ++iter) {
    const double a_real = std::floor(rest);
    if (a_real > 1e15) break;
    const long long a = static_cast<long long>(a_real);
    const long long p2 = a * p1 + p0;
    const long long q2 = a * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    if (std::abs(static_cast<double>(p1) / q1 - x) <= rel_tol * x) return {p1, q1};
    const double frac = rest - a_real;
    if (frac <= 0.0) break;
    rest = 1.0 / frac;
  }
  throw ParameterError("segment durations have no common rational grid at the configured resolution");
}

}  // namespace

double effective_nyquist(std::span<const double> segment_durations, int n_seq, double base_duration,
                         long long max_denominator, double rel_tol) {
  if (segment_durations.empty()) throw ParameterError("effective Nyquist needs at least one duration");
  if (n_seq < 1 || !(base_duration > 0.0)) throw ParameterError("effective Nyquist needs n_seq >= 1 and T_B > 0");
  const double reference = *std::max_element(segment_durations.begin(), segment_durations.end());
  for (double d : segment_durations)
    if (!(d > 0.0)) throw ParameterError("segment durations must be positive");
  std::vector<Fraction> ratios;
  long long common = 1;
  for (double d : segment_durations) {
    const Fraction f = rational_approximation(d / reference, max_denominator, rel_tol);
    ratios.push_back(f);
    const long long next = std::lcm(common, f.den);
    if (next / f.den != common / std::gcd(common, f.den) || next > (1LL << 52))
      throw ParameterError("segment durations have no common rational grid at the configured resolution");
    common = next;
  }
  long long g = 0;
  for (const Fraction& f : ratios) g = std::gcd(g, f.num * (common / f.den));
  const double dt_gcf = reference * static_cast<double>(g) / static_cast<double>(common);
  return std::min(2.0 * n_seq * kPi / base_duration, kPi / dt_gcf);
}

void write_filter_csv(const FilterCurve& filter, std::span<const double> omega, std::ostream& out) {
  out << "omega_rad_per_s,filter_rad2\n";
  char line[96];
  for (double w : omega) {
    std::snprintf(line, sizeof line, "%.12e,%.12e\n", w, filter(w));
    out << line;
  }
}

}  // namespace slepqns
