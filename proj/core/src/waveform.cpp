#include "slepqns/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <complex>
#include <numbers>
#include <ostream>
#include <random>

#include "fft.hpp"
#include "slepqns/errors.hpp"
#include "slepqns/random.hpp"

namespace slepqns {

namespace {

constexpr double kPi = std::numbers::pi;

std::string format_shift(double omega_s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", omega_s / (2.0 * kPi));
  return buf;
}

}  // namespace

double Waveform::rotation_angle() const {
  double s = 0.0;
  for (double x : omega) s += x;
  return s * dt;
}

double Waveform::power() const {
  double s = 0.0;
  for (double x : omega) s += x * x;
  return s * dt;
}

Modulation parse_modulation(const std::string& name) {
  if (name == "none") return Modulation::kNone;
  if (name == "cos") return Modulation::kCos;
  if (name == "sin") return Modulation::kSin;
  if (name == "ssb") return Modulation::kSsb;
  throw ParameterError("unknown modulation '" + name + "'");
}

std::string to_string(Modulation m) {
  switch (m) {
    case Modulation::kNone: return "none";
    case Modulation::kCos: return "cos";
    case Modulation::kSin: return "sin";
    case Modulation::kSsb: return "ssb";
  }
  return "none";
}

Waveform dpss_waveform(const Taper& taper, double scale, double dt) {
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  Waveform w;
  w.dt = dt;
  w.omega.resize(taper.values.size());
  std::transform(taper.values.begin(), taper.values.end(), w.omega.begin(),
                 [scale](double v) { return scale * v; });
  w.label = "dpss k=" + std::to_string(taper.order);
  return w;
}

Waveform modulate(const Waveform& w, Modulation mode, double omega_s) {
  if (!(omega_s >= 0.0) || omega_s >= 2.0 * kPi / w.dt) {
    throw ParameterError("shift frequency must lie in [0, 2pi/dt)");
  }
  Waveform out = w;
  const int n = w.size();
  if (mode == Modulation::kNone) return out;
  std::vector<double> hil;
  if (mode == Modulation::kSsb) hil = hilbert_transform(w.omega);
  for (int i = 0; i < n; ++i) {
    const double arg = i * omega_s * w.dt;
    const double c = std::cos(arg);
    const double s = std::sin(arg);
    switch (mode) {
      case Modulation::kCos: out.omega[i] = w.omega[i] * c; break;
      case Modulation::kSin: out.omega[i] = w.omega[i] * s; break;
      case Modulation::kSsb: out.omega[i] = w.omega[i] * c - hil[i] * s; break;
      case Modulation::kNone: break;
    }
  }
  out.label = w.label + " " + to_string(mode) + " f_s=" + format_shift(omega_s) + "Hz";
  return out;
}

std::pair<Waveform, Waveform> cs_pair(const Taper& taper, double scale, double dt, double omega_s) {
  const Waveform base = dpss_waveform(taper, scale, dt);
  return {modulate(base, Modulation::kCos, omega_s), modulate(base, Modulation::kSin, omega_s)};
}

Waveform normalize_power(const Waveform& w, double target) {
  if (!(target > 0.0)) throw ParameterError("power target must be positive");
  const double p = w.power();
  if (!(p > 0.0)) throw ParameterError("cannot normalize an identically zero waveform");
  Waveform out = w;
  const double f = std::sqrt(target / p);
  for (double& x : out.omega) x *= f;
  return out;
}

std::pair<Waveform, Waveform> normalize_pair_power(const std::pair<Waveform, Waveform>& pair, double target) {
  if (!(target > 0.0)) throw ParameterError("power target must be positive");
  const double p = pair.first.power() + pair.second.power();
  if (!(p > 0.0)) throw ParameterError("cannot normalize an identically zero waveform pair");
  const double f = std::sqrt(target / p);
  auto out = pair;
  for (double& x : out.first.omega) x *= f;
  for (double& x : out.second.omega) x *= f;
  return out;
}

void enforce_amplitude_cap(const Waveform& w, double cap) {
  for (double x : w.omega) {
    if (std::abs(x) > cap) {
      throw ParameterError("waveform '" + w.label + "' exceeds the amplitude cap");
    }
  }
}

Waveform cpmg_rse(int switches, double amplitude, double duration, int n) {
  if (switches < 0) throw ParameterError("switch count must be non-negative");
  if (n < 1 || !(duration > 0.0)) throw ParameterError("CPMG needs N >= 1 and T > 0");
  if (switches > 0 && n % (2 * switches) != 0) {
    throw ParameterError("CPMG switch times are not commensurate with the sample grid (N % 2n != 0)");
  }
  Waveform w;
  w.dt = duration / n;
  w.omega.assign(n, amplitude);
  if (switches > 0) {
    const int spacing = n / (2 * switches);
    for (int m = 0; m < n; ++m) {
      // Switch j sits at sample (2j - 1) * spacing; count those at or before m.
      const int passed = m < spacing ? 0 : (m - spacing) / (2 * spacing) + 1;
      if (passed % 2 == 1) w.omega[m] = -amplitude;
    }
  }
  w.label = "cpmg n=" + std::to_string(switches);
  return w;
}

Waveform repeat_base(const Waveform& w, int repetitions) {
  if (repetitions < 1) throw ParameterError("repetition count must be at least 1");
  Waveform out;
  out.dt = w.dt;
  out.omega.reserve(w.omega.size() * repetitions);
  for (int r = 0; r < repetitions; ++r) out.omega.insert(out.omega.end(), w.omega.begin(), w.omega.end());
  out.label = w.label + " x" + std::to_string(repetitions);
  return out;
}

std::vector<double> hilbert_transform(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  int len = 1;
  while (len < 4 * n) len *= 2;
  detail::ComplexFft fft(len);
  std::vector<std::complex<double>> buf(len);
  for (int i = 0; i < n; ++i) buf[i] = x[i];
  fft.forward(buf, buf);
  const int half = len / 2;
  const std::complex<double> minus_i(0.0, -1.0);
  buf[0] = 0.0;
  buf[half] = 0.0;
  for (int j = 1; j < half; ++j) buf[j] *= minus_i;
  for (int j = half + 1; j < len; ++j) buf[j] *= -minus_i;
  fft.backward(buf, buf);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = buf[i].real() / len;
  return out;
}

namespace {

struct SsqmGrid {
  std::vector<std::vector<double>> u;  // u[k][i] = U^(k)(theta_i)
  std::vector<double> lambda;
  std::vector<int> parity;
  double weight = 0.0;
  double target = 0.0;
};

SsqmGrid make_grid(std::span<const Taper> tapers, double w, int points) {
  SsqmGrid g;
  const double edge = 2.0 * kPi * w;
  g.weight = 2.0 * edge / points;
  g.target = 1.0 / (2.0 * w);
  for (const Taper& t : tapers) {
    std::vector<double> row(points);
    for (int i = 0; i < points; ++i) row[i] = dpswf_eval(t, 1.0, -edge + (i + 0.5) * g.weight);
    g.u.push_back(std::move(row));
    g.lambda.push_back(t.eigenvalue);
    g.parity.push_back(t.order % 2);
  }
  return g;
}

double cost_and_gradient(const SsqmGrid& g, std::span<const double> c, double leakage_weight,
                         std::vector<double>* grad) {
  const std::size_t k = c.size();
  const std::size_t m = g.u.front().size();
  std::vector<double> even(m, 0.0), odd(m, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    auto& acc = g.parity[j] ? odd : even;
    for (std::size_t i = 0; i < m; ++i) acc[i] += c[j] * g.u[j][i];
  }
  double cost = 0.0;
  std::vector<double> resid(m);
  for (std::size_t i = 0; i < m; ++i) {
    resid[i] = g.target - even[i] * even[i] - odd[i] * odd[i];
    cost += g.weight * resid[i] * resid[i];
  }
  double captured = 0.0;
  for (std::size_t j = 0; j < k; ++j) captured += c[j] * c[j] * g.lambda[j];
  cost += leakage_weight * (1.0 - captured);
  if (grad) {
    grad->assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& acc = g.parity[j] ? odd : even;
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += resid[i] * acc[i] * g.u[j][i];
      (*grad)[j] = -4.0 * g.weight * s - 2.0 * leakage_weight * g.lambda[j] * c[j];
    }
  }
  return cost;
}

void project_to_sphere(std::vector<double>& c) {
  double s = 0.0;
  for (double x : c) s += x * x;
  s = std::sqrt(s);
  for (double& x : c) x /= s;
}

// Riemannian gradient descent on the unit sphere with Armijo backtracking.
double descend(const SsqmGrid& g, std::vector<double>& c, double leakage_weight, int max_iterations) {
  std::vector<double> grad;
  double cost = cost_and_gradient(g, c, leakage_weight, &grad);
  double step = 1e-3;
  for (int iter = 0; iter < max_iterations; ++iter) {
    double radial = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) radial += grad[j] * c[j];
    double norm2 = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      grad[j] -= radial * c[j];
      norm2 += grad[j] * grad[j];
    }
    if (norm2 <= 1e-30) break;
    bool moved = false;
    std::vector<double> trial(c.size());
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < c.size(); ++j) trial[j] = c[j] - step * grad[j];
      project_to_sphere(trial);
      const double tc = cost_and_gradient(g, trial, leakage_weight, nullptr);
      if (tc <= cost - 1e-4 * step * norm2) {
        const double improvement = cost - tc;
        c = trial;
        cost = cost_and_gradient(g, c, leakage_weight, &grad);
        step *= 2.0;
        moved = true;
        if (improvement <= 1e-15 * std::max(cost, 1e-300)) return cost;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return cost;
}

}  // namespace

double ssqm_cost(std::span<const Taper> tapers, double w, std::span<const double> c, const SsqmOptions& options) {
  if (tapers.size() != c.size() || tapers.empty()) throw ParameterError("SSQM cost needs one coefficient per taper");
  const SsqmGrid g = make_grid(tapers, w, options.grid_points);
  return cost_and_gradient(g, c, options.leakage_weight, nullptr);
}

SsqmCoefficients ssqm_coefficients(const DpssParams& params, double dt, int k, std::uint64_t seed,
                                   const SsqmOptions& options) {
  params.validate();
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  if (k < 1 || k > shannon_number(params) + 2) {
    throw ParameterError("SSQM taper count must lie in [1, shannon_number + 2]");
  }
  const auto tapers = compute_dpss(params, k - 1);
  const SsqmGrid g = make_grid(tapers, params.w, options.grid_points);

  SsqmCoefficients out;
  std::vector<double> uniform(k, 1.0 / std::sqrt(static_cast<double>(k)));
  out.start_cost = cost_and_gradient(g, uniform, options.leakage_weight, nullptr);
  out.c = uniform;
  out.cost = out.start_cost;

  for (int start = 0; start <= options.random_starts; ++start) {
    std::vector<double> c = uniform;
    if (start > 0) {
      Rng rng(derive_seed(seed, 0x5359, start));
      std::normal_distribution<double> normal;
      for (double& x : c) x = normal(rng);
      project_to_sphere(c);
    }
    const double cost = descend(g, c, options.leakage_weight, options.max_iterations);
    if (std::isfinite(cost) && cost < out.cost) {
      out.cost = cost;
      out.c = c;
    }
  }
  if (!std::isfinite(out.cost) || out.cost > out.start_cost) {
    out.c = uniform;
    out.cost = out.start_cost;
    out.optimizer_failed = true;
  }
  // Canonical sign: the largest-magnitude coefficient is positive.
  const auto big = std::max_element(out.c.begin(), out.c.end(),
                                    [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (*big < 0.0) {
    for (double& x : out.c) x = -x;
  }
  project_to_sphere(out.c);
  return out;
}

Waveform ssqm_waveform(std::span<const Taper> tapers, std::span<const double> c, double scale, double dt) {
  if (tapers.size() != c.size() || tapers.empty()) throw ParameterError("SSQM waveform needs one coefficient per taper");
  Waveform w;
  w.dt = dt;
  w.omega.assign(tapers.front().values.size(), 0.0);
  for (std::size_t k = 0; k < tapers.size(); ++k) {
    for (std::size_t i = 0; i < w.omega.size(); ++i) w.omega[i] += scale * c[k] * tapers[k].values[i];
  }
  w.label = "ssqm K=" + std::to_string(tapers.size());
  return w;
}

void write_waveform_csv(const Waveform& w, std::ostream& out) {
  out << "n,t_start_s,omega_rad_per_s\n";
  out.precision(17);
  for (int i = 0; i < w.size(); ++i) out << i << ',' << i * w.dt << ',' << w.omega[i] << '\n';
}

}  // namespace slepqns
