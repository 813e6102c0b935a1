#include "slepqns/noise_model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fft.hpp"
#include "slepqns/errors.hpp"

namespace slepqns {

namespace {

constexpr double kPi = std::numbers::pi;

double lorentzian(const Lorentzian& l, double w) {
  const double x = (w - l.center) / l.width;
  return l.amplitude / (x * x + 1.0);
}

// Integral of the one-sided Lorentzian over [0, limit].
double lorentzian_integral(const Lorentzian& l, double limit) {
  return l.amplitude * l.width *
         (std::atan((limit - l.center) / l.width) + std::atan(l.center / l.width));
}

// Fraction of the PSD integral beyond `limit`, used to flag aliasing.
double tail_fraction(const PsdModel& m, double limit) {
  const double total = m.variance();
  if (!std::isfinite(total)) return 1.0;
  if (total <= 0.0) return 0.0;
  auto f = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double w = limit / u;
    return m(w) * limit / (u * u);
  };
  const double tail = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 12, 1e-10);
  return 2.0 * tail / (2.0 * kPi) / total;
}

}  // namespace

PsdModel::PsdModel(PsdVariant v) : v_(std::move(v)) {
  std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Flat>) {
          if (m.level < 0.0 || !(m.cutoff > 0.0)) throw ParameterError("flat PSD needs level >= 0 and cutoff > 0");
        } else if constexpr (std::is_same_v<T, Lorentzian>) {
          if (m.amplitude < 0.0 || !(m.width > 0.0)) throw ParameterError("Lorentzian needs C >= 0 and w_p > 0");
        } else if constexpr (std::is_same_v<T, GaussianMix>) {
          for (const auto& g : m.peaks) {
            if (g.amplitude < 0.0 || !(g.sigma > 0.0)) throw ParameterError("Gaussian peak needs C >= 0 and sigma > 0");
          }
        } else {
          if (m.floor < 0.0 || m.line.amplitude < 0.0 || !(m.line.width > 0.0) || !(m.cutoff > 0.0)) {
            throw ParameterError("white-plus-line PSD has invalid parameters");
          }
        }
      },
      v_);
}

double PsdModel::operator()(double omega) const {
  const double w = std::abs(omega);
  return std::visit(
      [w](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Flat>) {
          return w <= m.cutoff ? m.level : 0.0;
        } else if constexpr (std::is_same_v<T, Lorentzian>) {
          return lorentzian(m, w);
        } else if constexpr (std::is_same_v<T, GaussianMix>) {
          double s = 0.0;
          for (const auto& g : m.peaks) {
            const double x = (w - g.center) / g.sigma;
            s += g.amplitude * std::exp(-0.5 * x * x);
          }
          return s;
        } else {
          return w <= m.cutoff ? m.floor + lorentzian(m.line, w) : 0.0;
        }
      },
      v_);
}

std::string PsdModel::kind() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Flat>) return "flat";
        else if constexpr (std::is_same_v<T, Lorentzian>) return "lorentzian";
        else if constexpr (std::is_same_v<T, GaussianMix>) return "gaussian_mix";
        else return "white_plus_line";
      },
      v_);
}

bool PsdModel::is_zero() const {
  return std::visit(
      [](const auto& m) -> bool {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Flat>) return m.level == 0.0;
        else if constexpr (std::is_same_v<T, Lorentzian>) return m.amplitude == 0.0;
        else if constexpr (std::is_same_v<T, GaussianMix>) {
          return std::all_of(m.peaks.begin(), m.peaks.end(), [](const auto& g) { return g.amplitude == 0.0; });
        } else return m.floor == 0.0 && m.line.amplitude == 0.0;
      },
      v_);
}

double PsdModel::variance() const {
  const double two_sided = std::visit(
      [](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Flat>) {
          return m.level == 0.0 ? 0.0 : 2.0 * m.level * m.cutoff;
        } else if constexpr (std::is_same_v<T, Lorentzian>) {
          return 2.0 * m.amplitude * m.width * (0.5 * kPi + std::atan(m.center / m.width));
        } else if constexpr (std::is_same_v<T, GaussianMix>) {
          double s = 0.0;
          for (const auto& g : m.peaks) {
            s += g.amplitude * g.sigma * std::sqrt(0.5 * kPi) *
                 (1.0 + std::erf(g.center / (g.sigma * std::numbers::sqrt2)));
          }
          return 2.0 * s;
        } else {
          return 2.0 * (m.floor * m.cutoff + lorentzian_integral(m.line, m.cutoff));
        }
      },
      v_);
  return two_sided / (2.0 * kPi);
}

double PsdModel::band_variance(double limit) const {
  auto f = [this](double w) { return (*this)(w); };
  double edge = limit;
  if (const auto* flat = std::get_if<Flat>(&v_)) edge = std::min(limit, flat->cutoff);
  if (const auto* wl = std::get_if<WhitePlusLine>(&v_)) edge = std::min(limit, wl->cutoff);
  const double half = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, edge, 20, 1e-12);
  return 2.0 * half / (2.0 * kPi);
}

double PsdModel::support_hint() const {
  return std::visit(
      [](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Flat>) return m.cutoff;
        else if constexpr (std::is_same_v<T, Lorentzian>) return m.center + 50.0 * m.width;
        else if constexpr (std::is_same_v<T, GaussianMix>) {
          double hi = 0.0;
          for (const auto& g : m.peaks) hi = std::max(hi, g.center + 8.0 * g.sigma);
          return hi;
        } else return m.cutoff;
      },
      v_);
}

double psd_eval(const PsdModel& model, double omega) { return model(omega); }

SpectralSynthesizer::SpectralSynthesizer(const PsdModel& model, double dt, int samples, int block_factor)
    : dt_(dt), samples_(samples) {
  if (!(dt > 0.0)) throw ParameterError("noise sampling interval must be positive");
  if (samples < 1) throw ParameterError("trajectory needs at least one sample");
  if (block_factor < 1) throw ParameterError("block factor must be at least 1");
  block_ = block_factor * samples;
  block_ += block_ % 2;
  block_ = std::max(block_, 2);
  const int half = block_ / 2;
  scale_.resize(half + 1);
  const double norm = 1.0 / (block_ * dt_);
  for (int j = 0; j <= half; ++j) {
    scale_[j] = std::sqrt(model(2.0 * kPi * j * norm) * norm);
  }
  aliasing_warning_ = !model.is_zero() && tail_fraction(model, kPi / dt_) > 1e-3;
}

double SpectralSynthesizer::bin_spacing() const { return 2.0 * kPi / (block_ * dt_); }

double SpectralSynthesizer::sample_variance() const {
  const int half = block_ / 2;
  double v = scale_[0] * scale_[0] + scale_[half] * scale_[half];
  for (int j = 1; j < half; ++j) v += 2.0 * scale_[j] * scale_[j];
  return v;
}

void SpectralSynthesizer::draw_bins(Rng& rng, std::span<std::complex<double>> bins) const {
  boost::random::normal_distribution<double> normal;
  const int half = block_ / 2;
  const double root_half = std::sqrt(0.5);
  for (int j = 0; j <= half; ++j) {
    const double s = scale_[j];
    if (s == 0.0) {
      bins[j] = 0.0;
    } else if (j == 0 || j == half) {
      bins[j] = {s * normal(rng), 0.0};
    } else {
      const double re = normal(rng);
      const double im = normal(rng);
      bins[j] = {s * root_half * re, s * root_half * im};
    }
  }
}

NoiseTrajectory SpectralSynthesizer::realize(std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<std::complex<double>> bins(block_ / 2 + 1);
  draw_bins(rng, bins);
  std::vector<double> block(block_);
  detail::RealFft fft(block_);
  fft.inverse(bins, block);
  NoiseTrajectory traj;
  traj.samples.assign(block.begin(), block.begin() + samples_);
  traj.dt = dt_;
  traj.duration = samples_ * dt_;
  traj.seed = seed;
  traj.aliasing_warning = aliasing_warning_;
  return traj;
}

NoiseTrajectory synthesize(const PsdModel& model, double dt, double duration, std::uint64_t seed,
                           int block_factor) {
  if (!(duration > 0.0)) throw ParameterError("trajectory duration must be positive");
  const int samples = static_cast<int>(std::ceil(duration / dt - 1e-9));
  return SpectralSynthesizer(model, dt, samples, block_factor).realize(seed);
}

}  // namespace slepqns
