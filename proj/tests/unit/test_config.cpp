#include <gtest/gtest.h>

#include <numbers>

#include "slepqns/errors.hpp"
#include "slepqns/scenario_config.hpp"

using namespace slepqns;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string error_path(const json& doc) {
  try {
    parse_scenario_config(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

json minimal(const std::string& scenario) { return {{"schema_version", 1}, {"scenario", scenario}}; }

}  // namespace

TEST(Config, EveryDefaultDocumentParses) {
  for (auto kind : {ScenarioKind::kLorentzianVsRse, ScenarioKind::kCombVsDpss, ScenarioKind::kDetectLine,
                    ScenarioKind::kBayesRefine, ScenarioKind::kCustom}) {
    const auto cfg = parse_scenario_config(default_scenario_document(kind));
    EXPECT_EQ(cfg.kind, kind);
    EXPECT_EQ(parse_scenario_kind(to_string(kind)), kind);
  }
}

TEST(Config, LorentzianDefaultsMatchStudyParameters) {
  const auto cfg = parse_scenario_config(minimal("lorentzian-vs-rse"));
  EXPECT_EQ(cfg.waveform.n, 500);
  EXPECT_DOUBLE_EQ(cfg.waveform.dt, 4e-6);
  EXPECT_NEAR(cfg.waveform.duration(), 2e-3, 1e-15);
  EXPECT_EQ(cfg.simulation.shots, 2000);
  ASSERT_EQ(cfg.shifts.size(), 41u);
  EXPECT_NEAR(cfg.shifts[1], kTwoPi * 250.0, 1e-9);
  EXPECT_DOUBLE_EQ(cfg.waveform.power, 900.0);
}

TEST(Config, UnknownKeysAreRejectedWithPath) {
  json doc = minimal("custom");
  doc["bogus"] = 1;
  EXPECT_EQ(error_path(doc), "/bogus");
  doc = minimal("custom");
  doc["waveform"] = {{"nn", 3}};
  EXPECT_EQ(error_path(doc), "/waveform/nn");
  doc = minimal("custom");
  doc["psd"] = {{"kind", "flat"}, {"level", 1e-4}};
  EXPECT_EQ(error_path(doc), "/psd/level");
  doc = minimal("custom");
  doc["detection"] = {{"tapers", 3}};  // only valid for detection scenarios
  EXPECT_EQ(error_path(doc), "/detection");
}

TEST(Config, TypeAndRangeErrorsCarryPaths) {
  json doc = minimal("custom");
  doc["waveform"] = {{"dt_s", "fast"}};
  EXPECT_EQ(error_path(doc), "/waveform/dt_s");
  doc["waveform"] = {{"dt_s", -1.0}};
  EXPECT_EQ(error_path(doc), "/waveform/dt_s");
  doc = minimal("custom");
  doc["shifts"] = {{"values_hz", {1000.0, 200000.0}}};
  EXPECT_EQ(error_path(doc), "/shifts/1");
  doc = minimal("detect-line");
  doc["simulation"] = {{"shots", 2601}};
  EXPECT_EQ(error_path(doc), "/simulation/shots");
  doc = minimal("custom");
  doc["schema_version"] = 2;
  EXPECT_EQ(error_path(doc), "/schema_version");
  doc = minimal("bayes-refine");
  doc["refinement"] = {{"prior", {{"lambda", "huge"}}}};
  EXPECT_EQ(error_path(doc), "/refinement/prior/lambda");
  EXPECT_THROW(parse_scenario_config(minimal("fig-9")), ConfigError);
}

TEST(Config, MergeKeepsDefaultsAndReplacesWholeValues) {
  json doc = minimal("lorentzian-vs-rse");
  doc["waveform"] = {{"dt_s", 8e-6}};
  doc["shifts"] = {{"values_hz", {0.0, 125.0}}};
  const auto cfg = parse_scenario_config(doc);
  EXPECT_EQ(cfg.waveform.n, 500);
  EXPECT_DOUBLE_EQ(cfg.waveform.dt, 8e-6);
  ASSERT_EQ(cfg.shifts.size(), 2u);
  EXPECT_NEAR(cfg.shifts[1], kTwoPi * 125.0, 1e-12);
  EXPECT_FALSE(cfg.document["shifts"].contains("step_hz"));
}

TEST(Config, PsdRoundTripsThroughJson) {
  const json psd{{"kind", "white-plus-line"}, {"floor_per_hz", 2e-4}, {"amplitude_per_hz", 4e-3},
                 {"center_hz", 7960.0},       {"width_hz", 80.0},     {"cutoff_hz", 17500.0}};
  const PsdModel m = psd_from_json(psd);
  const json back = psd_to_json(m);
  for (const auto& [k, v] : psd.items()) {
    if (v.is_number()) EXPECT_NEAR(back[k].get<double>(), v.get<double>(), 1e-9 * std::abs(v.get<double>()));
    else EXPECT_EQ(back[k], v);
  }
  EXPECT_NEAR(m(kTwoPi * 20000.0), 0.0, 0.0);
}

TEST(Config, NullMeansAbsent) {
  json doc = minimal("bayes-refine");
  doc["refinement"] = {{"prior", {{"lambda", nullptr}}}};
  const auto cfg = parse_scenario_config(doc);
  EXPECT_EQ(cfg.refinement.lambda_rule, LambdaRule::kTraceScaled);
}

TEST(Config, ExperimentDocument) {
  const json doc{{"schema_version", 1},
                 {"psd", {{"kind", "flat"}, {"level_per_hz", 1e-4}}},
                 {"waveform", {{"n", 100}, {"dt_s", 1e-5}, {"w", 0.02}, {"orders", 2}}},
                 {"shift_hz", 3000.0},
                 {"order", 1},
                 {"simulation", {{"shots", 10}}}};
  const auto e = parse_experiment_document(doc);
  EXPECT_NEAR(e.shift, kTwoPi * 3000.0, 1e-9);
  EXPECT_EQ(e.order, 1);
  json bad = doc;
  bad["order"] = 100;
  EXPECT_THROW(parse_experiment_document(bad), ConfigError);
  bad = doc;
  bad["extra"] = true;
  EXPECT_THROW(parse_experiment_document(bad), ConfigError);
}
