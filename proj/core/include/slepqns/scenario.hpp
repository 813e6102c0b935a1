#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "slepqns/bayes.hpp"
#include "slepqns/comb.hpp"
#include "slepqns/estimation.hpp"
#include "slepqns/scenario_config.hpp"

namespace slepqns {

// One measurement setting: a waveform (or CS pair) with its filter and passband.
struct Setting {
  std::vector<Waveform> members;
  FilterCurve filter;
  PassbandSpec passband;
};

Setting make_setting(std::vector<Waveform> members, double omega_s, double w, double dt,
                     const IntegrationOptions& options);

// Per-shot variance of the signal estimator when the true first-order signal is v.
double expected_shot_variance(SignalModel model, double v);

// Monte Carlo run of one setting; CS pairs add the signals and variances of
// both members, each measured with `shots` shots.
ExperimentResult simulate_setting(const Setting& setting, const PsdModel& model, const SimulationSpec& sim,
                                  int shots, SignalModel signal_model, std::uint64_t seed, int threads = 1);

// One estimator evaluated over a grid of shift frequencies.
struct EstimatorTrack {
  std::string tag;
  int order = -1;
  int shots = 0;
  std::vector<double> omega;
  std::vector<Setting> settings;
  std::vector<double> expected_signal;  // oracle S(T)
  std::vector<double> expected;         // oracle estimate S(T) / A
  std::vector<double> expected_sd;      // oracle standard deviation at `shots`
  std::vector<ExperimentResult> results;  // empty when oracle-only
  std::vector<EstimateRecord> records;

  bool simulated() const { return !records.empty(); }
  SpectrumEstimate expected_spectrum() const;
  SpectrumEstimate monte_carlo_spectrum() const;
};

struct TrackRequest {
  std::string tag;
  int order = -1;
  int shots = 0;
  SignalModel signal_model = SignalModel::kLinear;
  std::uint64_t stream = 0;  // seed stream of this track
};

// Expected values for every setting, plus Monte Carlo estimates unless
// oracle_only; settings are processed in parallel over cfg.threads.
EstimatorTrack run_track(std::vector<Setting> settings, std::vector<double> omega, const TrackRequest& request,
                         const ScenarioConfig& cfg, bool oracle_only);

// DPSS settings of one taper order over a shift grid.
std::vector<Setting> dpss_settings(const WaveformSpec& spec, const Taper& taper, const std::vector<double>& shifts,
                                   const IntegrationOptions& options, int threads);

struct LorentzianStudy {
  std::vector<double> truth;
  EstimatorTrack dpss;
  EstimatorTrack rse;  // empty when disabled
};

LorentzianStudy lorentzian_study(const ScenarioConfig& cfg, bool oracle_only);

// CPMG RSE waveform with n sign switches over duration T on at least n_min
// samples, normalized to the given power (n = 0 is constant amplitude).
Waveform rse_waveform(int switches, double duration, int n_min, double power);

struct CombPanelResult {
  CombProtocol protocol;
  CombSystem system;
  double effective_nyquist = 0.0;
  double resolution = 0.0;  // 2 pi / T_B
  std::vector<double> truth;
  std::optional<CombReconstruction> exact;
  std::optional<CombReconstruction> delta_comb;
  std::optional<CombReconstruction> monte_carlo;
  std::vector<double> monte_carlo_sd;
  std::vector<ExperimentResult> results;
};

struct CombStudy {
  std::vector<CombPanelResult> comb;
  std::vector<EstimatorTrack> dpss;  // one per DPSS panel
  std::vector<std::vector<double>> dpss_truth;
};

CombStudy comb_study(const ScenarioConfig& cfg, bool oracle_only);

struct SignificanceTrack {
  std::vector<double> sigma_bound;
  SignificanceResult test;
};

struct DetectionStudy {
  std::vector<double> shifts;
  std::vector<double> truth;
  EstimatorTrack k0;                 // order 0 with all M shots
  EstimatorTrack ssqm;               // SSQM setting with all M shots
  std::vector<EstimatorTrack> tapers;  // orders 0..K-1 with M / K shots each
  SsqmCoefficients ssqm_coefficients;
  std::vector<EstimateRecord> aqm;           // Monte Carlo (empty when oracle-only)
  std::vector<EstimateRecord> aqm_expected;  // AQM run on the expected eigenestimates
  SignificanceTrack z_k0, z_ssqm, z_aqm;
  SignificanceTrack z_k0_expected, z_ssqm_expected, z_aqm_expected;
  // Segment grid shared with the refinement stage.
  SegmentGrid grid;
  std::vector<std::vector<double>> taper_segment_areas;  // [k * P + p][q]
  std::vector<std::vector<double>> k0_segment_areas;     // [p][q]
  std::vector<std::vector<double>> ssqm_segment_areas;   // [p][q]
  // Fisher information of the passband estimates with all M shots: leading
  // term and covariance-dependence term, [p][q].
  std::vector<std::vector<double>> fisher_leading_k0, fisher_covariance_k0;
  std::vector<std::vector<double>> fisher_leading_ssqm, fisher_covariance_ssqm;

  const std::vector<double>& taper_areas(int k, int p) const { return taper_segment_areas[k * shifts.size() + p]; }
};

DetectionStudy detection_study(const ScenarioConfig& cfg, bool oracle_only);

// Largest ratio covariance term / leading term over all shifts and segments
// whose leading term is nonzero.
double max_fisher_correction_ratio(const DetectionStudy& study);

struct BayesStudy {
  DetectionStudy detection;
  SegmentGrid grid;
  std::vector<double> truth;  // S at segment centres
  std::vector<std::vector<double>> information;  // Q x P, AQM Fisher information
  InterpolatedEstimate interpolated;
  GaussianBelief prior;
  EstimatorTrack narrow;
  Eigen::MatrixXd filter_matrix;  // P x Q, F_pq = A_q / A
  GaussianBelief posterior;
  bool used_expected_data = false;  // oracle-only: expected estimates as data
};

BayesStudy bayes_study(const ScenarioConfig& cfg, bool oracle_only);

struct CustomStudy {
  std::vector<double> truth;
  std::vector<EstimatorTrack> orders;
  std::vector<EstimateRecord> aqm;
  std::vector<EstimateRecord> aqm_expected;
};

CustomStudy custom_study(const ScenarioConfig& cfg, bool oracle_only);

struct ScenarioRunOptions {
  std::optional<std::filesystem::path> output_dir;  // overrides the config
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool oracle_only = false;
};

struct ScenarioOutcome {
  std::filesystem::path directory;
  nlohmann::json manifest;
  bool ok = true;
};

// Runs a scenario and writes its bundle. A failure after the output
// directory exists leaves the files written so far plus a manifest with
// status "error"; the exception is then rethrown.
ScenarioOutcome run_scenario(const nlohmann::json& document, const ScenarioRunOptions& options = {});

// Accepts a scenario document or a manifest written by run_scenario.
nlohmann::json scenario_document_from(const nlohmann::json& config_or_manifest);

std::string library_version();

}  // namespace slepqns
