#include "slepqns/qubit_sim.hpp"

#include <algorithm>
#include <boost/random/bernoulli_distribution.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>
#include <variant>

#include "fft.hpp"
#include "slepqns/errors.hpp"

namespace slepqns {
namespace {

constexpr std::uint64_t axis_stream(Axis a) { return 0x5A0 + static_cast<std::uint64_t>(a); }

// Frequency above which the model is identically zero.
double hard_cutoff(const PsdModel& model) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WhitePlusLine>) return v.cutoff;
        if constexpr (std::is_same_v<T, Flat>) return v.cutoff;
        return std::numeric_limits<double>::infinity();
      },
      model.variant());
}

}  // namespace

std::string to_string(Axis a) {
  switch (a) {
    case Axis::kX: return "x";
    case Axis::kY: return "y";
    case Axis::kZ: return "z";
  }
  return "z";
}

Axis parse_axis(const std::string& name) {
  if (name == "x") return Axis::kX;
  if (name == "y") return Axis::kY;
  if (name == "z") return Axis::kZ;
  throw ParameterError("unknown measurement axis '" + name + "'");
}

std::string to_string(SignalModel m) {
  return m == SignalModel::kLinear ? "linear" : "gaussian-inversion";
}

SignalModel parse_signal_model(const std::string& name) {
  if (name == "linear") return SignalModel::kLinear;
  if (name == "gaussian-inversion") return SignalModel::kGaussianInversion;
  throw ParameterError("unknown signal model '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (shots < 1) throw ParameterError("shot count M must be at least 1");
  if (oversampling < 1) throw ParameterError("noise oversampling must be at least 1");
  if (block_factor < 1) throw ParameterError("synthesis block factor must be at least 1");
  if (waveform.omega.empty() || !(waveform.dt > 0.0)) throw ParameterError("experiment needs a sampled waveform");
  if (axes.empty()) throw ParameterError("at least one measurement axis is required");
  if (threads < 1) throw ParameterError("thread count must be at least 1");
}

double error_angle(const Waveform& w, const NoiseTrajectory& traj) {
  const double ratio = w.dt / traj.dt;
  const long long os = std::llround(ratio);
  if (os < 1 || std::abs(ratio - static_cast<double>(os)) > 1e-9 * ratio)
    throw ParameterError("noise spacing must divide the control spacing");
  if (static_cast<long long>(traj.samples.size()) < os * w.size())
    throw ParameterError("noise trajectory is shorter than the waveform");
  double a = 0.0;
  for (int n = 0; n < w.size(); ++n) {
    double segment = 0.0;
    for (long long i = 0; i < os; ++i) segment += traj.samples[n * os + i];
    a += w.omega[n] * segment * traj.dt;
  }
  return 0.5 * a;
}

ShotEngine::ShotEngine(const Waveform& w, const PsdModel& model, int oversampling, int block_factor)
    : waveform_(w),
      oversampling_(oversampling),
      synth_(model, w.dt / oversampling, oversampling * w.size(), block_factor) {
  const int len = synth_.block_length();
  const double dt_noise = synth_.dt();
  std::vector<double> g(len, 0.0);
  for (int i = 0; i < oversampling * w.size(); ++i) g[i] = w.omega[i / oversampling] * dt_noise;
  detail::RealFft fft(len);
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(g, spec);
  const auto scale = synth_.bin_scale();
  for (int j = 0; j < fft.bins(); ++j) {
    if (scale[j] == 0.0) continue;
    active_.push_back(j);
    projection_.push_back(spec[j]);
    multiplicity_.push_back(j == 0 || 2 * j == len ? 1.0 : 2.0);
  }
}

double ShotEngine::error_angle(Rng& rng, ShotPath path) const {
  std::vector<std::complex<double>> bins(synth_.block_length() / 2 + 1);
  synth_.draw_bins(rng, bins);
  if (path == ShotPath::kTrajectory) {
    NoiseTrajectory traj;
    traj.dt = synth_.dt();
    traj.samples.resize(synth_.block_length());
    detail::RealFft fft(synth_.block_length());
    fft.inverse(bins, traj.samples);
    traj.samples.resize(synth_.samples());
    return slepqns::error_angle(waveform_, traj);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const std::complex<double> b = bins[active_[i]];
    const std::complex<double> g = projection_[i];
    sum += multiplicity_[i] * (b.real() * g.real() + b.imag() * g.imag());
  }
  return 0.5 * sum;
}

double ShotEngine::error_variance() const {
  const auto scale = synth_.bin_scale();
  double v = 0.0;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const double s = scale[active_[i]];
    v += multiplicity_[i] * s * s * std::norm(projection_[i]);
  }
  return 0.25 * v;
}

ExperimentResult summarize_counts(std::vector<AxisCounts> counts, SignalModel model) {
  auto find = [&](Axis a) -> const AxisCounts* {
    for (const auto& c : counts)
      if (c.axis == a) return &c;
    return nullptr;
  };
  const AxisCounts* x = find(Axis::kX);
  const AxisCounts* y = find(Axis::kY);
  const AxisCounts* z = find(Axis::kZ);
  auto bern = [](const AxisCounts* c) { return c->p_hat() * (1.0 - c->p_hat()); };

  ExperimentResult r;
  r.signal_model = model;
  double linear = 0.0;
  if (x && y && z) {
    linear = 0.5 * (1.0 + x->p_hat() - y->p_hat() - z->p_hat());
    r.sigma2 = 0.25 * (bern(x) + bern(y) + bern(z));
    r.shots = z->shots;
  } else if (z || y) {
    const AxisCounts* c = z ? z : y;
    linear = 1.0 - c->p_hat();
    r.sigma2 = bern(c);
    r.shots = c->shots;
  } else {
    throw ParameterError("the signal needs a y or z measurement");
  }
  if (model == SignalModel::kLinear) {
    r.signal = linear;
  } else {
    // P_eff = 1 - S_linear; the clamp keeps the logarithm finite at P <= 1/2.
    double contrast = 1.0 - 2.0 * linear;
    const double floor = 1.0 / std::max(r.shots, 1);
    if (contrast < floor) {
      contrast = floor;
      r.saturated = true;
    }
    r.signal = -0.5 * std::log(contrast);
    r.sigma2 /= contrast * contrast;
  }
  r.counts = std::move(counts);
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ShotEngine engine(cfg.waveform, cfg.model, cfg.oversampling, cfg.block_factor);
  std::vector<AxisCounts> counts;
  for (Axis axis : cfg.axes) {
    const int workers = std::min(cfg.threads, cfg.shots);
    std::vector<int> ups(workers, 0);
    auto work = [&](int worker) {
      const int begin = static_cast<int>(static_cast<long long>(cfg.shots) * worker / workers);
      const int end = static_cast<int>(static_cast<long long>(cfg.shots) * (worker + 1) / workers);
      int up = 0;
      for (int shot = begin; shot < end; ++shot) {
        Rng rng(derive_seed(cfg.seed, axis_stream(axis), static_cast<std::uint64_t>(shot)));
        double p = 1.0;  // with beta_z = 0 the x projection survives with certainty
        if (axis != Axis::kX) {
          const double c = std::cos(engine.error_angle(rng, cfg.path));
          p = c * c;
        }
        boost::random::bernoulli_distribution<double> outcome(p);
        up += outcome(rng) ? 1 : 0;
      }
      ups[worker] = up;
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < workers; ++t) pool.emplace_back(work, t);
    }
    int total = 0;
    for (int u : ups) total += u;
    counts.push_back({axis, cfg.shots, total});
  }
  ExperimentResult r = summarize_counts(std::move(counts), cfg.signal_model);
  r.label = cfg.waveform.label;
  r.seed = cfg.seed;
  r.aliasing_warning = engine.aliasing_warning();
  return r;
}

double expected_signal(const PsdModel& model, const FilterCurve& filter, const IntegrationOptions& options) {
  if (model.is_zero()) return 0.0;
  const double cut = hard_cutoff(model);
  auto s = [&](double w) { return model(w); };
  const double half = std::isfinite(cut) ? filter.integrate(s, 0.0, cut, options)
                                         : filter.integrate(s, 0.0, std::numeric_limits<double>::infinity(), options);
  return half / std::numbers::pi;
}

double expected_signal(const PsdModel& model, const Waveform& w, const IntegrationOptions& options) {
  return expected_signal(model, FilterCurve(w), options);
}

double survival_signal(double error_variance) { return 0.5 * (1.0 - std::exp(-2.0 * error_variance)); }

}  // namespace slepqns
