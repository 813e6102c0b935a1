#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "slepqns/comb.hpp"
#include "slepqns/estimation.hpp"
#include "slepqns/filter.hpp"
#include "slepqns/noise_model.hpp"
#include "slepqns/qubit_sim.hpp"
#include "slepqns/waveform.hpp"

namespace slepqns {

inline constexpr int kScenarioSchemaVersion = 1;

enum class ScenarioKind { kLorentzianVsRse, kCombVsDpss, kDetectLine, kBayesRefine, kCustom };

std::string to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& name);

// A DPSS waveform family; all quantities in SI after parsing.
struct WaveformSpec {
  int n = 500;
  double dt = 4e-6;
  double w = 0.002;  // cycles per sample
  int orders = 1;    // tapers 0..orders-1
  Modulation modulation = Modulation::kCos;
  bool cs = false;  // COS + SIN pair, jointly normalized
  double power = 900.0;
  std::optional<double> amplitude_cap;

  DpssParams params() const { return {n, w}; }
  double nyquist() const;
  double duration() const { return n * dt; }
};

// Normalized waveform for one taper and shift; for CS this is the COS member
// and cs_partner returns the SIN member.
Waveform build_waveform(const WaveformSpec& spec, const Taper& taper, double omega_s);
Waveform build_cs_partner(const WaveformSpec& spec, const Taper& taper, double omega_s);

struct SimulationSpec {
  int shots = 2000;
  int oversampling = 8;
  int block_factor = 4;
  SignalModel signal_model = SignalModel::kLinear;
  std::vector<Axis> axes{Axis::kZ};
};

struct DpssPanel {
  WaveformSpec waveform;
  std::vector<double> shifts;  // rad/s
};

struct CombSpec {
  std::vector<double> base_durations;  // one comb reconstruction per entry
  int h_max = 12;
  int repetitions = 20;
  int switches = 2;
  int samples_per_base = 64;
  double power = 900.0;
  bool exact = true;
  bool delta_comb = true;

  CombProtocol protocol(double base_duration) const;
};

struct DetectionSpec {
  int tapers = 13;
  MultitaperOptions aqm;
  SsqmOptions ssqm;
  std::uint64_t ssqm_seed = 7;
  bool covariance_term = true;  // report the Fisher covariance-dependence term
  double segment_width = 2.0 * std::numbers::pi * 150.0;  // rad/s, 0.15 kHz
  int segments = 94;
};

enum class LambdaRule { kFixed, kTraceScaled, kMeanScale };

struct RefinementSpec {
  WaveformSpec waveform;
  std::vector<double> shifts;  // rad/s
  int shots = 2600;
  SignalModel signal_model = SignalModel::kGaussianInversion;
  bool diffuse_prior = false;
  double diffuse_sigma = 1.0;  // 1/Hz, used when diffuse_prior
  LambdaRule lambda_rule = LambdaRule::kMeanScale;
  double lambda = 0.0;  // used with kFixed
  double condition_limit = 1e10;
  double credible_level = 0.95;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kCustom;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_dir = "out";
  bool oracle_only = false;  // expected values only, no Monte Carlo
  PsdModel psd;
  WaveformSpec waveform;
  std::vector<double> shifts;  // rad/s
  SimulationSpec simulation;
  IntegrationOptions integration;
  bool rse = true;
  CombSpec comb;
  std::vector<DpssPanel> panels;
  DetectionSpec detection;
  RefinementSpec refinement;
  int filter_points = 1024;
  // Complete document in configuration units (Hz); reproduces this config.
  nlohmann::json document;
};

// Default document of a scenario, in configuration units.
nlohmann::json default_scenario_document(ScenarioKind kind);

// Validates against schema version 1, merging the document over the
// scenario defaults first; errors carry the JSON pointer of the bad value.
ScenarioConfig parse_scenario_config(const nlohmann::json& document);

// One experiment for the simulate subcommand: a DPSS waveform of one
// order at one shift frequency.
struct ExperimentDocument {
  PsdModel psd;
  WaveformSpec waveform;
  double shift = 0.0;  // rad/s
  int order = 0;
  SimulationSpec simulation;
  IntegrationOptions integration;
  std::uint64_t seed = 1;
  nlohmann::json document;
};

ExperimentDocument parse_experiment_document(const nlohmann::json& document);

// PSD models in configuration units (amplitudes in 1/Hz, frequencies in Hz).
PsdModel psd_from_json(const nlohmann::json& j, const std::string& path = "/psd");
nlohmann::json psd_to_json(const PsdModel& model);

WaveformSpec waveform_from_json(const nlohmann::json& j, const std::string& path = "/waveform");
std::vector<double> shifts_from_json(const nlohmann::json& j, const std::string& path = "/shifts");

}  // namespace slepqns
