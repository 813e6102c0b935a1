#include "slepqns/scenario.hpp"

#include <fftw3.h>

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "slepqns/errors.hpp"
#include "slepqns/io.hpp"

#ifndef SLEPQNS_VERSION
#define SLEPQNS_VERSION "0.0.0"
#endif

namespace slepqns {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

// Seed streams; each track, comb base and panel draws from its own stream.
constexpr std::uint64_t kStreamK0 = 1;
constexpr std::uint64_t kStreamRse = 2;
constexpr std::uint64_t kStreamSsqm = 3;
constexpr std::uint64_t kStreamNarrow = 4;
constexpr std::uint64_t kStreamComb = 50;
constexpr std::uint64_t kStreamPanel = 70;
constexpr std::uint64_t kStreamTaper = 100;

// Runs fn(i) for i in [0, count) on up to `threads` workers; the first
// exception is rethrown after all workers stop.
template <class F>
void parallel_for(std::size_t count, int threads, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

double survival_probability(double v) { return 0.5 * (1.0 + std::exp(-2.0 * v)); }

std::vector<double> evaluate(const PsdModel& model, std::span<const double> omega) {
  std::vector<double> out(omega.size());
  for (std::size_t i = 0; i < omega.size(); ++i) out[i] = model(omega[i]);
  return out;
}

std::vector<double> linear_grid(double hi, int points) {
  std::vector<double> out(points);
  for (int i = 0; i < points; ++i) out[i] = hi * i / (points - 1);
  return out;
}

double z_probability(const ExperimentResult& r) {
  for (const AxisCounts& c : r.counts)
    if (c.axis == Axis::kZ) return c.p_hat();
  return r.counts.empty() ? 0.5 : r.counts.front().p_hat();
}

}  // namespace

std::string library_version() { return SLEPQNS_VERSION; }

Setting make_setting(std::vector<Waveform> members, double omega_s, double w, double dt,
                     const IntegrationOptions& options) {
  if (members.empty()) throw ParameterError("a setting needs at least one waveform");
  Setting s;
  if (members.size() == 1) {
    s.filter = FilterCurve(members.front());
  } else {
    std::vector<FilterCurve> parts;
    for (const Waveform& m : members) parts.emplace_back(m);
    const std::vector<double> ones(parts.size(), 1.0);
    s.filter = FilterCurve::combine(parts, ones);
  }
  s.members = std::move(members);
  s.passband = passband(s.filter, omega_s, w, dt, options);
  return s;
}

double expected_shot_variance(SignalModel model, double v) {
  const double p = survival_probability(v);
  const double bern = p * (1.0 - p);
  if (model == SignalModel::kLinear) return bern;
  const double contrast = 2.0 * p - 1.0;
  return bern / (contrast * contrast);
}

ExperimentResult simulate_setting(const Setting& setting, const PsdModel& model, const SimulationSpec& sim, int shots,
                                  SignalModel signal_model, std::uint64_t seed, int threads) {
  ExperimentResult total;
  for (std::size_t m = 0; m < setting.members.size(); ++m) {
    ExperimentConfig cfg;
    cfg.waveform = setting.members[m];
    cfg.model = model;
    cfg.shots = shots;
    cfg.oversampling = sim.oversampling;
    cfg.block_factor = sim.block_factor;
    cfg.seed = setting.members.size() == 1 ? seed : derive_seed(seed, 0xC5, m);
    cfg.axes = sim.axes;
    cfg.signal_model = signal_model;
    cfg.threads = threads;
    ExperimentResult r = run_experiment(cfg);
    if (m == 0) {
      total = std::move(r);
      total.seed = seed;
      continue;
    }
    total.label += " + " + r.label;
    total.signal += r.signal;
    total.sigma2 += r.sigma2;
    total.saturated = total.saturated || r.saturated;
    total.aliasing_warning = total.aliasing_warning || r.aliasing_warning;
    total.counts.insert(total.counts.end(), r.counts.begin(), r.counts.end());
  }
  return total;
}

SpectrumEstimate EstimatorTrack::expected_spectrum() const {
  SpectrumEstimate s;
  s.omega = omega;
  s.value = expected;
  s.std_dev = expected_sd;
  s.tag = tag + "-expected";
  s.unestimable.assign(omega.size(), false);
  s.provenance = {{"shots", shots}, {"order", order}, {"kind", "oracle"}};
  return s;
}

SpectrumEstimate EstimatorTrack::monte_carlo_spectrum() const {
  SpectrumEstimate s;
  s.tag = tag;
  for (const EstimateRecord& r : records) {
    s.omega.push_back(r.omega_s);
    s.value.push_back(r.value);
    s.std_dev.push_back(r.std_dev());
  }
  s.unestimable.assign(s.omega.size(), false);
  s.provenance = {{"shots", shots}, {"order", order}, {"kind", "monte-carlo"}};
  return s;
}

EstimatorTrack run_track(std::vector<Setting> settings, std::vector<double> omega, const TrackRequest& request,
                         const ScenarioConfig& cfg, bool oracle_only) {
  if (settings.size() != omega.size()) throw ParameterError("one setting per shift frequency is required");
  EstimatorTrack t;
  t.tag = request.tag;
  t.order = request.order;
  t.shots = request.shots;
  t.omega = std::move(omega);
  t.settings = std::move(settings);
  const std::size_t n = t.settings.size();
  t.expected_signal.resize(n);
  t.expected.resize(n);
  t.expected_sd.resize(n);
  parallel_for(n, cfg.threads, [&](std::size_t p) {
    const Setting& s = t.settings[p];
    const double v = expected_signal(cfg.psd, s.filter, cfg.integration);
    const double a = s.passband.area;
    if (!(a > 1e-12)) throw NumericError("degenerate passband at shift " + std::to_string(t.omega[p] / kTwoPi) + " Hz");
    t.expected_signal[p] = v;
    t.expected[p] = v / a;
    const double members = static_cast<double>(s.members.size());
    t.expected_sd[p] = std::sqrt(members * expected_shot_variance(request.signal_model, v / members) /
                                 (request.shots * a * a));
  });
  if (oracle_only) return t;

  t.results.resize(n);
  t.records.resize(n);
  parallel_for(n, cfg.threads, [&](std::size_t p) {
    const Setting& s = t.settings[p];
    t.results[p] = simulate_setting(s, cfg.psd, cfg.simulation, request.shots, request.signal_model,
                                    derive_seed(cfg.seed, request.stream, p));
    EstimateRecord r = eigenestimate(t.results[p], s.passband);
    r.tag = request.tag;
    r.order = request.order;
    t.records[p] = r;
  });
  return t;
}

std::vector<Setting> dpss_settings(const WaveformSpec& spec, const Taper& taper, const std::vector<double>& shifts,
                                   const IntegrationOptions& options, int threads) {
  std::vector<Setting> out(shifts.size());
  parallel_for(shifts.size(), threads, [&](std::size_t p) {
    std::vector<Waveform> members{build_waveform(spec, taper, shifts[p])};
    if (spec.cs) members.push_back(build_cs_partner(spec, taper, shifts[p]));
    out[p] = make_setting(std::move(members), shifts[p], spec.w, spec.dt, options);
  });
  return out;
}

Waveform rse_waveform(int switches, double duration, int n_min, double power) {
  if (switches < 0 || n_min < 1) throw ParameterError("RSE needs switches >= 0 and at least one sample");
  const int n = switches == 0 ? n_min : 2 * switches * ((n_min + 2 * switches - 1) / (2 * switches));
  Waveform w = normalize_power(cpmg_rse(switches, 1.0, duration, n), power);
  w.label = "rse n=" + std::to_string(switches);
  return w;
}

LorentzianStudy lorentzian_study(const ScenarioConfig& cfg, bool oracle_only) {
  LorentzianStudy out;
  const WaveformSpec& spec = cfg.waveform;
  out.truth = evaluate(cfg.psd, cfg.shifts);
  const auto tapers = compute_dpss(spec.params(), 0);
  out.dpss = run_track(dpss_settings(spec, tapers[0], cfg.shifts, cfg.integration, cfg.threads), cfg.shifts,
                       {"k=0", 0, cfg.simulation.shots, cfg.simulation.signal_model, kStreamK0}, cfg, oracle_only);
  if (!cfg.rse) return out;

  const double duration = spec.duration();
  std::vector<Setting> rse(cfg.shifts.size());
  parallel_for(cfg.shifts.size(), cfg.threads, [&](std::size_t p) {
    const double n_real = cfg.shifts[p] * duration / kPi;
    const int n = static_cast<int>(std::lround(n_real));
    if (std::abs(n_real - n) > 1e-6) {
      throw ConfigError("/shifts/" + std::to_string(p), "the RSE comparison needs shifts at multiples of pi/T (" +
                                                            std::to_string(0.5 / duration) + " Hz)");
    }
    rse[p] = make_setting({rse_waveform(n, duration, spec.n, spec.power)}, cfg.shifts[p], spec.w, spec.dt,
                          cfg.integration);
  });
  out.rse = run_track(std::move(rse), cfg.shifts,
                      {"rse", -1, cfg.simulation.shots, cfg.simulation.signal_model, kStreamRse}, cfg, oracle_only);
  return out;
}

CombStudy comb_study(const ScenarioConfig& cfg, bool oracle_only) {
  CombStudy out;
  for (std::size_t i = 0; i < cfg.comb.base_durations.size(); ++i) {
    CombPanelResult panel;
    panel.protocol = cfg.comb.protocol(cfg.comb.base_durations[i]);
    panel.system = comb_system(panel.protocol);
    const auto durations = panel.protocol.segment_durations();
    panel.effective_nyquist = effective_nyquist(durations, panel.protocol.h_max, panel.protocol.base_duration);
    panel.resolution = kTwoPi / panel.protocol.base_duration;
    panel.truth = evaluate(cfg.psd, panel.system.harmonics);
    if (cfg.comb.exact) {
      panel.exact = comb_reconstruct(
          panel.system, comb_expected_signals(panel.protocol, cfg.psd, CombExpectation::kExact, cfg.integration));
    }
    if (cfg.comb.delta_comb) {
      panel.delta_comb = comb_reconstruct(
          panel.system, comb_expected_signals(panel.protocol, cfg.psd, CombExpectation::kDeltaComb, cfg.integration));
    }
    if (!oracle_only) {
      const int h = panel.protocol.h_max;
      panel.results.resize(h);
      parallel_for(static_cast<std::size_t>(h), cfg.threads, [&](std::size_t j) {
        Setting s;
        s.members = {panel.protocol.repeated(static_cast<int>(j) + 1)};
        panel.results[j] = simulate_setting(s, cfg.psd, cfg.simulation, cfg.simulation.shots,
                                            cfg.simulation.signal_model,
                                            derive_seed(cfg.seed, kStreamComb + i, j));
      });
      std::vector<double> signals(h);
      Eigen::VectorXd variances(h);
      for (int j = 0; j < h; ++j) {
        signals[j] = panel.results[j].signal;
        variances(j) = panel.results[j].variance();
      }
      panel.monte_carlo = comb_reconstruct(panel.system, signals);
      const Eigen::MatrixXd pinv = panel.system.matrix.completeOrthogonalDecomposition().pseudoInverse();
      const Eigen::MatrixXd cov = pinv * variances.asDiagonal() * pinv.transpose();
      for (int m = 0; m < h; ++m) panel.monte_carlo_sd.push_back(std::sqrt(std::max(cov(m, m), 0.0)));
    }
    out.comb.push_back(std::move(panel));
  }
  for (std::size_t i = 0; i < cfg.panels.size(); ++i) {
    const DpssPanel& panel = cfg.panels[i];
    const auto tapers = compute_dpss(panel.waveform.params(), 0);
    out.dpss.push_back(run_track(dpss_settings(panel.waveform, tapers[0], panel.shifts, cfg.integration, cfg.threads),
                                 panel.shifts,
                                 {"k=0", 0, cfg.simulation.shots, cfg.simulation.signal_model, kStreamPanel + i}, cfg,
                                 oracle_only));
    out.dpss_truth.push_back(evaluate(cfg.psd, panel.shifts));
  }
  return out;
}

namespace {

std::vector<std::vector<double>> track_segment_areas(const EstimatorTrack& t, const SegmentGrid& grid,
                                                     const ScenarioConfig& cfg) {
  std::vector<std::vector<double>> out(t.settings.size());
  parallel_for(out.size(), cfg.threads, [&](std::size_t p) {
    out[p] = segment_areas(t.settings[p].filter, grid.d_omega, grid.count, cfg.integration);
  });
  return out;
}

SignificanceTrack passband_significance(const std::vector<double>& values, const EstimatorTrack& t) {
  SignificanceTrack s;
  for (const Setting& setting : t.settings) s.sigma_bound.push_back(passband_sigma_bound(t.shots, setting.passband.area));
  s.test = significance_test(values, s.sigma_bound);
  return s;
}

SignificanceTrack multitaper_significance(const std::vector<EstimateRecord>& aqm,
                                          const std::vector<EstimatorTrack>& tapers) {
  SignificanceTrack s;
  std::vector<double> values;
  for (std::size_t p = 0; p < aqm.size(); ++p) {
    std::vector<int> shots;
    std::vector<double> areas;
    for (const EstimatorTrack& t : tapers) {
      shots.push_back(t.shots);
      areas.push_back(t.settings[p].passband.area);
    }
    s.sigma_bound.push_back(multitaper_sigma_bound(aqm[p].weights, shots, areas));
    values.push_back(aqm[p].value);
  }
  s.test = significance_test(values, s.sigma_bound);
  return s;
}

std::vector<double> values_of(const std::vector<EstimateRecord>& records) {
  std::vector<double> out;
  for (const EstimateRecord& r : records) out.push_back(r.value);
  return out;
}

// Leading and covariance-dependence Fisher terms of passband estimates
// with the survival probability of each setting.
void passband_fisher(const EstimatorTrack& t, const std::vector<std::vector<double>>& areas, bool simulated,
                     SignalModel model, std::vector<std::vector<double>>& leading,
                     std::vector<std::vector<double>>& covariance) {
  leading.clear();
  covariance.clear();
  for (std::size_t p = 0; p < t.settings.size(); ++p) {
    const double prob = simulated ? z_probability(t.results[p]) : survival_probability(t.expected_signal[p]);
    const double clamped = std::clamp(prob, 0.5 / t.shots, 1.0 - 0.5 / t.shots);
    double sigma2 = clamped * (1.0 - clamped);
    if (model == SignalModel::kGaussianInversion) sigma2 /= (2.0 * clamped - 1.0) * (2.0 * clamped - 1.0);
    leading.push_back(fisher_information_passband(areas[p], t.shots, sigma2));
    covariance.push_back(fisher_covariance_term(areas[p], clamped));
  }
}

}  // namespace

DetectionStudy detection_study(const ScenarioConfig& cfg, bool oracle_only) {
  DetectionStudy out;
  const WaveformSpec& spec = cfg.waveform;
  const DetectionSpec& det = cfg.detection;
  const int k_count = det.tapers;
  const int m = cfg.simulation.shots;
  const SignalModel model = cfg.simulation.signal_model;
  out.shifts = cfg.shifts;
  out.truth = evaluate(cfg.psd, cfg.shifts);
  out.grid = {det.segment_width, det.segments};

  const auto tapers = compute_dpss(spec.params(), k_count - 1);
  std::vector<std::vector<Setting>> taper_settings(k_count);
  for (int k = 0; k < k_count; ++k)
    taper_settings[k] = dpss_settings(spec, tapers[k], cfg.shifts, cfg.integration, cfg.threads);

  out.k0 = run_track(taper_settings[0], cfg.shifts, {"k=0", 0, m, model, kStreamK0}, cfg, oracle_only);
  for (int k = 0; k < k_count; ++k) {
    out.tapers.push_back(run_track(taper_settings[k], cfg.shifts,
                                   {"k=" + std::to_string(k), k, m / k_count, model, kStreamTaper + k}, cfg,
                                   oracle_only));
  }

  out.ssqm_coefficients = ssqm_coefficients(spec.params(), spec.dt, k_count, det.ssqm_seed, det.ssqm);
  const Waveform ss_base = ssqm_waveform(tapers, out.ssqm_coefficients.c, 1.0, spec.dt);
  std::vector<Setting> ss_settings(cfg.shifts.size());
  parallel_for(cfg.shifts.size(), cfg.threads, [&](std::size_t p) {
    std::vector<Waveform> members;
    if (spec.cs) {
      auto pair = normalize_pair_power({modulate(ss_base, Modulation::kCos, cfg.shifts[p]),
                                        modulate(ss_base, Modulation::kSin, cfg.shifts[p])},
                                       spec.power);
      members = {std::move(pair.first), std::move(pair.second)};
    } else {
      members = {normalize_power(modulate(ss_base, spec.modulation, cfg.shifts[p]), spec.power)};
    }
    if (spec.amplitude_cap)
      for (const Waveform& w : members) enforce_amplitude_cap(w, *spec.amplitude_cap);
    ss_settings[p] = make_setting(std::move(members), cfg.shifts[p], spec.w, spec.dt, cfg.integration);
  });
  out.ssqm = run_track(std::move(ss_settings), cfg.shifts, {"ss", -1, m, model, kStreamSsqm}, cfg, oracle_only);

  // Bias rows and local moments do not depend on the data.
  const std::size_t p_count = cfg.shifts.size();
  std::vector<std::vector<TaperChannel>> channels(p_count, std::vector<TaperChannel>(k_count));
  parallel_for(p_count * k_count, cfg.threads, [&](std::size_t idx) {
    const std::size_t p = idx / k_count;
    const std::size_t k = idx % k_count;
    const Setting& s = out.tapers[k].settings[p];
    channels[p][k].broadband_row = broadband_bias_row(cfg.shifts, s.passband, s.filter, cfg.integration);
    channels[p][k].local_moment = local_bias_moment(s.passband, s.filter, cfg.integration);
  });

  auto expected_channels = channels;
  for (std::size_t p = 0; p < p_count; ++p) {
    for (int k = 0; k < k_count; ++k) {
      const EstimatorTrack& t = out.tapers[k];
      EstimateRecord& r = expected_channels[p][k].estimate;
      r.omega_s = cfg.shifts[p];
      r.value = t.expected[p];
      r.variance = t.expected_sd[p] * t.expected_sd[p];
      r.lo = t.settings[p].passband.lo;
      r.hi = t.settings[p].passband.hi;
      r.area = t.settings[p].passband.area;
      r.order = k;
      r.tag = t.tag;
      if (!oracle_only) channels[p][k].estimate = t.records[p];
    }
  }
  out.aqm_expected = adaptive_multitaper(cfg.shifts, expected_channels, det.aqm);
  out.z_k0_expected = passband_significance(out.k0.expected, out.k0);
  out.z_ssqm_expected = passband_significance(out.ssqm.expected, out.ssqm);
  out.z_aqm_expected = multitaper_significance(out.aqm_expected, out.tapers);
  if (!oracle_only) {
    out.aqm = adaptive_multitaper(cfg.shifts, channels, det.aqm);
    out.z_k0 = passband_significance(values_of(out.k0.records), out.k0);
    out.z_ssqm = passband_significance(values_of(out.ssqm.records), out.ssqm);
    out.z_aqm = multitaper_significance(out.aqm, out.tapers);
  }

  out.k0_segment_areas = track_segment_areas(out.k0, out.grid, cfg);
  out.ssqm_segment_areas = track_segment_areas(out.ssqm, out.grid, cfg);
  out.taper_segment_areas.resize(static_cast<std::size_t>(k_count) * p_count);
  for (int k = 0; k < k_count; ++k) {
    auto areas = track_segment_areas(out.tapers[k], out.grid, cfg);
    for (std::size_t p = 0; p < p_count; ++p) out.taper_segment_areas[k * p_count + p] = std::move(areas[p]);
  }
  if (det.covariance_term) {
    passband_fisher(out.k0, out.k0_segment_areas, !oracle_only, model, out.fisher_leading_k0,
                    out.fisher_covariance_k0);
    passband_fisher(out.ssqm, out.ssqm_segment_areas, !oracle_only, model, out.fisher_leading_ssqm,
                    out.fisher_covariance_ssqm);
  }
  return out;
}

double max_fisher_correction_ratio(const DetectionStudy& study) {
  double worst = 0.0;
  auto scan = [&](const std::vector<std::vector<double>>& lead, const std::vector<std::vector<double>>& cov) {
    for (std::size_t p = 0; p < lead.size(); ++p)
      for (std::size_t q = 0; q < lead[p].size(); ++q)
        if (lead[p][q] > 0.0) worst = std::max(worst, cov[p][q] / lead[p][q]);
  };
  scan(study.fisher_leading_k0, study.fisher_covariance_k0);
  scan(study.fisher_leading_ssqm, study.fisher_covariance_ssqm);
  return worst;
}

BayesStudy bayes_study(const ScenarioConfig& cfg, bool oracle_only) {
  BayesStudy out;
  out.detection = detection_study(cfg, oracle_only);
  const DetectionStudy& det = out.detection;
  const RefinementSpec& ref = cfg.refinement;
  out.grid = det.grid;
  const auto centres = out.grid.centres();
  out.truth = evaluate(cfg.psd, centres);

  // Detection-stage AQM estimates and their Fisher information.
  const auto& aqm = oracle_only ? det.aqm_expected : det.aqm;
  const std::size_t p_count = det.shifts.size();
  const int k_count = static_cast<int>(det.tapers.size());
  std::vector<double> values(p_count), variances(p_count);
  out.information.assign(out.grid.count, std::vector<double>(p_count, 0.0));
  for (std::size_t p = 0; p < p_count; ++p) {
    values[p] = aqm[p].value;
    variances[p] = aqm[p].variance;
    std::vector<std::vector<double>> taper_areas;
    std::vector<double> passband_areas;
    for (int k = 0; k < k_count; ++k) {
      taper_areas.push_back(det.taper_areas(k, static_cast<int>(p)));
      passband_areas.push_back(det.tapers[k].settings[p].passband.area);
    }
    const auto effective = effective_segment_areas(aqm[p].weights, taper_areas, passband_areas);
    const auto info = fisher_information(effective, variances[p]);
    for (int q = 0; q < out.grid.count; ++q) out.information[q][p] = info[q];
  }
  out.interpolated = interpolated_estimate(values, variances, out.information, centres);

  if (ref.diffuse_prior) {
    out.prior = diffuse_prior(out.grid.count, ref.diffuse_sigma);
  } else {
    PriorOptions po;
    po.condition_limit = ref.condition_limit;
    if (ref.lambda_rule == LambdaRule::kFixed) {
      po.lambda = ref.lambda;
    } else if (ref.lambda_rule == LambdaRule::kMeanScale) {
      double scale = 0.0;
      for (double v : out.interpolated.spectrum.value) scale = std::max(scale, std::abs(v));
      po.lambda = scale * scale;
    }
    out.prior = build_prior(out.interpolated, variances, po);
  }

  const auto taper0 = compute_dpss(ref.waveform.params(), 0);
  out.narrow = run_track(dpss_settings(ref.waveform, taper0[0], ref.shifts, cfg.integration, cfg.threads), ref.shifts,
                         {"k=0-narrow", 0, ref.shots, ref.signal_model, kStreamNarrow}, cfg, oracle_only);
  const auto narrow_areas = track_segment_areas(out.narrow, out.grid, cfg);
  const Eigen::Index rows = static_cast<Eigen::Index>(ref.shifts.size());
  out.filter_matrix.resize(rows, out.grid.count);
  Eigen::VectorXd data(rows), noise(rows);
  for (Eigen::Index p = 0; p < rows; ++p) {
    const double a = out.narrow.settings[p].passband.area;
    for (int q = 0; q < out.grid.count; ++q) out.filter_matrix(p, q) = narrow_areas[p][q] / a;
    if (oracle_only) {
      data(p) = out.narrow.expected[p];
      noise(p) = out.narrow.expected_sd[p] * out.narrow.expected_sd[p];
    } else {
      data(p) = out.narrow.records[p].value;
      noise(p) = out.narrow.records[p].variance;
    }
  }
  out.used_expected_data = oracle_only;
  out.posterior = posterior(out.prior, data, out.filter_matrix, noise);
  return out;
}

CustomStudy custom_study(const ScenarioConfig& cfg, bool oracle_only) {
  CustomStudy out;
  out.truth = evaluate(cfg.psd, cfg.shifts);
  const auto tapers = compute_dpss(cfg.waveform.params(), cfg.waveform.orders - 1);
  for (int k = 0; k < cfg.waveform.orders; ++k) {
    out.orders.push_back(run_track(dpss_settings(cfg.waveform, tapers[k], cfg.shifts, cfg.integration, cfg.threads),
                                   cfg.shifts,
                                   {"k=" + std::to_string(k), k, cfg.simulation.shots, cfg.simulation.signal_model,
                                    kStreamTaper + k},
                                   cfg, oracle_only));
  }
  if (cfg.waveform.orders < 2 || cfg.shifts.size() < 1) return out;
  const std::size_t p_count = cfg.shifts.size();
  std::vector<std::vector<TaperChannel>> channels(p_count, std::vector<TaperChannel>(cfg.waveform.orders));
  auto expected = channels;
  for (std::size_t p = 0; p < p_count; ++p) {
    for (int k = 0; k < cfg.waveform.orders; ++k) {
      const EstimatorTrack& t = out.orders[k];
      const Setting& s = t.settings[p];
      TaperChannel c;
      c.broadband_row = broadband_bias_row(cfg.shifts, s.passband, s.filter, cfg.integration);
      c.local_moment = local_bias_moment(s.passband, s.filter, cfg.integration);
      c.estimate.omega_s = cfg.shifts[p];
      c.estimate.value = t.expected[p];
      c.estimate.variance = t.expected_sd[p] * t.expected_sd[p];
      c.estimate.lo = s.passband.lo;
      c.estimate.hi = s.passband.hi;
      c.estimate.area = s.passband.area;
      expected[p][k] = c;
      if (!oracle_only) c.estimate = t.records[p];
      channels[p][k] = std::move(c);
    }
  }
  out.aqm_expected = adaptive_multitaper(cfg.shifts, expected);
  if (!oracle_only) out.aqm = adaptive_multitaper(cfg.shifts, channels);
  return out;
}

// ---------------------------------------------------------------------------
// Bundle writing

namespace {

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns) {
  std::ostringstream ss;
  write_columns_csv(ss, header, columns);
  return ss.str();
}

std::string spectrum_csv(const SpectrumEstimate& s) {
  std::ostringstream ss;
  write_spectrum_csv(s, ss);
  return ss.str();
}

std::string filter_csv(const FilterCurve& f, const std::vector<double>& omega) {
  std::ostringstream ss;
  write_filter_csv(f, omega, ss);
  return ss.str();
}

std::string records_spectrum_csv(const std::vector<EstimateRecord>& records, const std::string& tag) {
  SpectrumEstimate s;
  s.tag = tag;
  for (const EstimateRecord& r : records) {
    s.omega.push_back(r.omega_s);
    s.value.push_back(r.value);
    s.std_dev.push_back(r.std_dev());
  }
  return spectrum_csv(s);
}

nlohmann::json records_json(const std::vector<EstimateRecord>& records) {
  nlohmann::json out = nlohmann::json::array();
  for (const EstimateRecord& r : records) out.push_back(to_json(r));
  return out;
}

nlohmann::json results_json(const std::vector<ExperimentResult>& results) {
  nlohmann::json out = nlohmann::json::array();
  for (const ExperimentResult& r : results) out.push_back(to_json(r));
  return out;
}

std::string slug(std::string tag) {
  for (char& c : tag)
    if (c == '=' || c == ' ' || c == '/') c = '-';
  return tag;
}

void write_track(BundleWriter& out, const EstimatorTrack& t, const std::string& name, const std::vector<double>& grid,
                 bool write_filters) {
  out.write("expected_" + name + ".csv", spectrum_csv(t.expected_spectrum()));
  if (t.simulated()) {
    out.write("estimates_" + name + ".csv", spectrum_csv(t.monte_carlo_spectrum()));
    out.write_json("records_" + name + ".json",
                   {{"tag", t.tag}, {"records", records_json(t.records)}, {"experiments", results_json(t.results)}});
  }
  if (!write_filters) return;
  for (std::size_t p = 0; p < t.settings.size(); ++p) {
    char idx[16];
    std::snprintf(idx, sizeof idx, "%03zu", p);
    out.write("filters/" + name + "_" + idx + ".csv", filter_csv(t.settings[p].filter, grid));
  }
}

void write_true_psd(BundleWriter& out, const PsdModel& model, double hi, int points) {
  const auto omega = linear_grid(hi, points);
  out.write("true_psd.csv", csv({"omega_rad_per_s", "psd_per_hz"}, {omega, evaluate(model, omega)}));
}

void write_significance(BundleWriter& out, const std::string& name, const std::vector<double>& shifts,
                        const std::vector<double>& values, const SignificanceTrack& s) {
  out.write(name, csv({"omega_rad_per_s", "estimate_per_hz", "sigma_bound_per_hz", "z"}, {shifts, values, s.sigma_bound, s.test.z}));
}

nlohmann::json significance_json(const SignificanceTrack& s) {
  return {{"null_mean", s.test.null_mean}, {"z", s.test.z}, {"sigma_bound", s.sigma_bound}};
}

void write_aqm(BundleWriter& out, const std::string& name, const std::vector<EstimateRecord>& aqm,
               const DetectionStudy& det, const std::vector<double>& grid) {
  out.write(name + ".csv", records_spectrum_csv(aqm, "m"));
  out.write_json(name + ".json", records_json(aqm));
  std::vector<FilterCurve> filters;
  for (std::size_t p = 0; p < aqm.size(); ++p) {
    std::vector<FilterCurve> parts;
    std::vector<double> areas;
    for (const EstimatorTrack& t : det.tapers) {
      parts.push_back(t.settings[p].filter);
      areas.push_back(t.settings[p].passband.area);
    }
    char idx[16];
    std::snprintf(idx, sizeof idx, "%03zu", p);
    out.write("filters/" + name + "_effective_" + idx + ".csv",
              filter_csv(effective_filter(parts, aqm[p].weights, areas), grid));
  }
}

nlohmann::json belief_json(const GaussianBelief& b, const std::vector<double>& centres, double level) {
  const auto [lo, hi] = b.credible_interval(level);
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < b.covariance.rows(); ++i) {
    std::vector<double> row(b.covariance.cols());
    for (Eigen::Index j = 0; j < b.covariance.cols(); ++j) row[j] = b.covariance(i, j);
    cov.push_back(row);
  }
  std::vector<double> mean(b.mean.data(), b.mean.data() + b.mean.size());
  return {{"omega_rad_per_s", centres},
          {"mean", mean},
          {"ci_low", std::vector<double>(lo.data(), lo.data() + lo.size())},
          {"ci_high", std::vector<double>(hi.data(), hi.data() + hi.size())},
          {"credible_level", level},
          {"negative_mean", b.negative_mean()},
          {"lambda", b.lambda},
          {"lambda_raised", b.lambda_raised},
          {"condition_number", b.condition_number},
          {"covariance", cov}};
}

std::string posterior_csv(const GaussianBelief& b, const std::vector<double>& centres, double level) {
  std::ostringstream ss;
  write_posterior_csv(b, centres, ss, level);
  return ss.str();
}

void write_detection(BundleWriter& out, const DetectionStudy& det, const ScenarioConfig& cfg,
                     const std::vector<double>& grid, bool oracle_only) {
  write_track(out, det.k0, "k0", grid, true);
  write_track(out, det.ssqm, "ssqm", grid, true);
  for (const EstimatorTrack& t : det.tapers) write_track(out, t, "taper_" + slug(t.tag), grid, false);
  write_aqm(out, "aqm_expected", det.aqm_expected, det, grid);
  write_significance(out, "significance_k0_expected.csv", det.shifts, det.k0.expected, det.z_k0_expected);
  write_significance(out, "significance_ssqm_expected.csv", det.shifts, det.ssqm.expected, det.z_ssqm_expected);
  write_significance(out, "significance_aqm_expected.csv", det.shifts, values_of(det.aqm_expected),
                     det.z_aqm_expected);
  nlohmann::json summary{{"ssqm_coefficients", det.ssqm_coefficients.c},
                         {"ssqm_cost", det.ssqm_coefficients.cost},
                         {"ssqm_start_cost", det.ssqm_coefficients.start_cost},
                         {"ssqm_optimizer_failed", det.ssqm_coefficients.optimizer_failed},
                         {"aqm_expected_iterations", det.aqm_expected.front().iterations},
                         {"significance_expected",
                          {{"k0", significance_json(det.z_k0_expected)},
                           {"ssqm", significance_json(det.z_ssqm_expected)},
                           {"aqm", significance_json(det.z_aqm_expected)}}}};
  if (!oracle_only) {
    write_aqm(out, "aqm", det.aqm, det, grid);
    write_significance(out, "significance_k0.csv", det.shifts, values_of(det.k0.records), det.z_k0);
    write_significance(out, "significance_ssqm.csv", det.shifts, values_of(det.ssqm.records), det.z_ssqm);
    write_significance(out, "significance_aqm.csv", det.shifts, values_of(det.aqm), det.z_aqm);
    summary["aqm_iterations"] = det.aqm.front().iterations;
    summary["aqm_converged"] = det.aqm.front().converged;
    summary["significance"] = {{"k0", significance_json(det.z_k0)},
                               {"ssqm", significance_json(det.z_ssqm)},
                               {"aqm", significance_json(det.z_aqm)}};
  }
  if (cfg.detection.covariance_term) {
    std::vector<double> pcol, qcol, lk0, ck0, lss, css;
    for (std::size_t p = 0; p < det.fisher_leading_k0.size(); ++p) {
      for (std::size_t q = 0; q < det.fisher_leading_k0[p].size(); ++q) {
        pcol.push_back(static_cast<double>(p));
        qcol.push_back(static_cast<double>(q));
        lk0.push_back(det.fisher_leading_k0[p][q]);
        ck0.push_back(det.fisher_covariance_k0[p][q]);
        lss.push_back(det.fisher_leading_ssqm[p][q]);
        css.push_back(det.fisher_covariance_ssqm[p][q]);
      }
    }
    out.write("fisher.csv", csv({"shift_index", "segment_index", "k0_leading_hz2", "k0_covariance_term_hz2",
                                 "ssqm_leading_hz2", "ssqm_covariance_term_hz2"},
                                {pcol, qcol, lk0, ck0, lss, css}));
    summary["fisher_max_correction_ratio"] = max_fisher_correction_ratio(det);
  }
  out.write_json("detection.json", summary);
}

nlohmann::json versions_json() {
  return {{"slepqns", library_version()},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"fftw", std::string(fftw_version)},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

void run_bundle(const ScenarioConfig& cfg, BundleWriter& out, nlohmann::json& summary) {
  const bool oracle = cfg.oracle_only;
  const int points = cfg.filter_points;
  switch (cfg.kind) {
    case ScenarioKind::kLorentzianVsRse: {
      write_true_psd(out, cfg.psd, cfg.waveform.nyquist(), points);
      const auto study = lorentzian_study(cfg, oracle);
      const auto grid = linear_grid(cfg.waveform.nyquist(), points);
      write_track(out, study.dpss, "dpss", grid, true);
      std::vector<std::string> header{"omega_rad_per_s", "psd_per_hz", "dpss_expected_per_hz", "dpss_relative_error",
                                      "dpss_expected_std_dev_per_hz"};
      std::vector<double> rel_d, rel_r;
      for (std::size_t p = 0; p < study.truth.size(); ++p) {
        rel_d.push_back((study.dpss.expected[p] - study.truth[p]) / study.truth[p]);
        if (cfg.rse) rel_r.push_back((study.rse.expected[p] - study.truth[p]) / study.truth[p]);
      }
      std::vector<std::vector<double>> cols{cfg.shifts, study.truth, study.dpss.expected, rel_d, study.dpss.expected_sd};
      if (cfg.rse) {
        write_track(out, study.rse, "rse", grid, true);
        header.insert(header.end(), {"rse_expected_per_hz", "rse_relative_error", "rse_expected_std_dev_per_hz"});
        cols.insert(cols.end(), {study.rse.expected, rel_r, study.rse.expected_sd});
      }
      out.write("relative_error.csv", csv(header, cols));
      break;
    }
    case ScenarioKind::kCombVsDpss: {
      double hi = 0.0;
      for (const DpssPanel& p : cfg.panels) hi = std::max(hi, p.waveform.nyquist());
      for (double tb : cfg.comb.base_durations) hi = std::max(hi, kTwoPi * cfg.comb.h_max / tb);
      write_true_psd(out, cfg.psd, hi, points);
      const auto study = comb_study(cfg, oracle);
      nlohmann::json combs = nlohmann::json::array();
      for (std::size_t i = 0; i < study.comb.size(); ++i) {
        const CombPanelResult& c = study.comb[i];
        std::vector<std::string> header{"omega_rad_per_s", "psd_per_hz"};
        std::vector<std::vector<double>> cols{c.system.harmonics, c.truth};
        if (c.exact) header.push_back("exact_expected_per_hz"), cols.push_back(c.exact->values);
        if (c.delta_comb) header.push_back("delta_comb_expected_per_hz"), cols.push_back(c.delta_comb->values);
        if (c.monte_carlo) {
          header.insert(header.end(), {"monte_carlo_per_hz", "monte_carlo_std_dev_per_hz"});
          cols.push_back(c.monte_carlo->values);
          cols.push_back(c.monte_carlo_sd);
        }
        const std::string name = "comb_" + std::to_string(i);
        out.write(name + ".csv", csv(header, cols));
        const auto fgrid = linear_grid(c.effective_nyquist * 2.0, points);
        for (int j = 1; j <= c.protocol.h_max; ++j) {
          out.write("filters/" + name + "_base_" + std::to_string(j) + ".csv",
                    filter_csv(FilterCurve(c.protocol.repeated(j)), fgrid));
        }
        nlohmann::json entry{{"base_duration_s", c.protocol.base_duration},
                             {"effective_nyquist_hz", c.effective_nyquist / kTwoPi},
                             {"resolution_hz", c.resolution / kTwoPi},
                             {"condition_number", c.system.condition_number}};
        if (!c.results.empty()) entry["experiments"] = results_json(c.results);
        combs.push_back(entry);
      }
      for (std::size_t i = 0; i < study.dpss.size(); ++i) {
        const auto grid = linear_grid(cfg.panels[i].waveform.nyquist(), points);
        write_track(out, study.dpss[i], "dpss_panel" + std::to_string(i), grid, true);
      }
      out.write_json("comb.json", combs);
      summary["comb"] = combs;
      break;
    }
    case ScenarioKind::kDetectLine: {
      write_true_psd(out, cfg.psd, cfg.waveform.nyquist(), points);
      const auto det = detection_study(cfg, oracle);
      write_detection(out, det, cfg, linear_grid(cfg.waveform.nyquist(), points), oracle);
      break;
    }
    case ScenarioKind::kBayesRefine: {
      write_true_psd(out, cfg.psd, cfg.waveform.nyquist(), points);
      const auto study = bayes_study(cfg, oracle);
      write_detection(out, study.detection, cfg, linear_grid(cfg.waveform.nyquist(), points), oracle);
      const auto centres = study.grid.centres();
      const double level = cfg.refinement.credible_level;
      write_track(out, study.narrow, "narrow", linear_grid(cfg.refinement.waveform.nyquist(), points), true);
      out.write("segments.csv", csv({"omega_rad_per_s", "psd_per_hz"}, {centres, study.truth}));
      out.write("interpolated.csv", spectrum_csv(study.interpolated.spectrum));
      out.write("prior.csv", posterior_csv(study.prior, centres, level));
      out.write("posterior.csv", posterior_csv(study.posterior, centres, level));
      out.write_json("bayes.json", {{"prior", belief_json(study.prior, centres, level)},
                                    {"posterior", belief_json(study.posterior, centres, level)},
                                    {"used_expected_data", study.used_expected_data}});
      summary["prior_lambda"] = study.prior.lambda;
      summary["prior_condition_number"] = study.prior.condition_number;
      break;
    }
    case ScenarioKind::kCustom: {
      write_true_psd(out, cfg.psd, cfg.waveform.nyquist(), points);
      const auto study = custom_study(cfg, oracle);
      const auto grid = linear_grid(cfg.waveform.nyquist(), points);
      for (const EstimatorTrack& t : study.orders) write_track(out, t, slug(t.tag), grid, true);
      if (!study.aqm_expected.empty()) out.write("aqm_expected.csv", records_spectrum_csv(study.aqm_expected, "m"));
      if (!study.aqm.empty()) {
        out.write("aqm.csv", records_spectrum_csv(study.aqm, "m"));
        out.write_json("aqm.json", records_json(study.aqm));
      }
      break;
    }
  }
}

}  // namespace

nlohmann::json scenario_document_from(const nlohmann::json& config_or_manifest) {
  if (config_or_manifest.is_object() && config_or_manifest.contains("manifest_version")) {
    if (!config_or_manifest.contains("config")) throw ConfigError("/config", "manifest has no config");
    return config_or_manifest.at("config");
  }
  return config_or_manifest;
}

ScenarioOutcome run_scenario(const nlohmann::json& input, const ScenarioRunOptions& options) {
  nlohmann::json document = scenario_document_from(input);
  if (!document.is_object()) throw ConfigError("", "expected a JSON object");
  if (options.seed) document["seed"] = *options.seed;
  if (options.threads) document["threads"] = *options.threads;
  if (options.oracle_only) document["oracle_only"] = true;
  if (options.output_dir) document["output_dir"] = options.output_dir->string();
  const ScenarioConfig cfg = parse_scenario_config(document);

  ScenarioOutcome outcome;
  outcome.directory = cfg.output_dir;
  BundleWriter out(outcome.directory);
  nlohmann::json manifest{{"manifest_version", 1},
                          {"scenario", to_string(cfg.kind)},
                          {"seed", cfg.seed},
                          {"oracle_only", cfg.oracle_only},
                          {"units", {{"config", "frequencies in Hz, PSD in 1/Hz"},
                                     {"outputs", "omega in rad/s with omega = 2 pi f, PSD in 1/Hz"}}},
                          {"integration_cutoff_factor", cfg.integration.cutoff_factor},
                          {"versions", versions_json()},
                          {"config", cfg.document}};
  nlohmann::json summary = nlohmann::json::object();
  const auto start = std::chrono::steady_clock::now();
  try {
    run_bundle(cfg, out, summary);
  } catch (const std::exception& e) {
    manifest["status"] = "error";
    manifest["error"] = {{"message", e.what()}};
    if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) manifest["error"]["path"] = ce->path();
    manifest["files"] = out.listing();
    out.write_json("manifest.json", manifest);
    throw;
  }
  manifest["status"] = "ok";
  manifest["summary"] = summary;
  manifest["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest["files"] = out.listing();
  out.write_json("manifest.json", manifest);
  outcome.manifest = manifest;
  return outcome;
}

}  // namespace slepqns
