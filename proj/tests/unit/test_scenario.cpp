#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "slepqns/errors.hpp"
#include "slepqns/io.hpp"
#include "slepqns/scenario.hpp"

using namespace slepqns;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("slepqns_unit_" + name);
  fs::remove_all(p);
  return p;
}

json small_custom(double level) {
  return {{"schema_version", 1},
          {"scenario", "custom"},
          {"seed", 5},
          {"psd", {{"kind", "flat"}, {"level_per_hz", level}, {"cutoff_hz", 40000.0}}},
          {"waveform", {{"n", 100}, {"dt_s", 1e-5}, {"w", 0.03}, {"orders", 2}}},
          {"shifts", {{"start_hz", 0.0}, {"step_hz", 2000.0}, {"count", 5}}},
          {"simulation", {{"shots", 200}}},
          {"output", {{"filter_points", 16}}}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

ScenarioRunOptions into(const fs::path& dir, bool oracle_only = false) {
  ScenarioRunOptions o;
  o.output_dir = dir;
  o.oracle_only = oracle_only;
  return o;
}

}  // namespace

TEST(Scenario, EmptyNoiseGivesZeroEstimates) {
  const fs::path dir = scratch("empty");
  const auto outcome = run_scenario(small_custom(0.0), into(dir));
  EXPECT_TRUE(outcome.ok);
  EXPECT_EQ(outcome.manifest["status"], "ok");
  for (const char* name : {"estimates_k-0.csv", "estimates_k-1.csv", "aqm.csv"}) {
    const auto rows = read_csv(dir / name);
    ASSERT_EQ(rows.size(), 6u) << name;
    EXPECT_EQ(rows[0][1], "estimate_per_hz");
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(std::stod(rows[i][1]), 0.0) << name;
  }
}

TEST(Scenario, BundleIsRegeneratedFromManifest) {
  const fs::path a = scratch("roundtrip_a"), b = scratch("roundtrip_b");
  run_scenario(small_custom(1e-4), into(a));
  const json manifest = read_json_file(a / "manifest.json");
  EXPECT_EQ(manifest["seed"], 5);
  run_scenario(manifest, into(b));
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(read_text_file(entry.path()), read_text_file(b / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 10u);
}

TEST(Scenario, SeedChangesMonteCarloOnly) {
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  run_scenario(small_custom(1e-4), into(a));
  ScenarioRunOptions reseeded = into(b);
  reseeded.seed = 6;
  run_scenario(small_custom(1e-4), reseeded);
  EXPECT_EQ(read_text_file(a / "expected_k-0.csv"), read_text_file(b / "expected_k-0.csv"));
  EXPECT_NE(read_text_file(a / "estimates_k-0.csv"), read_text_file(b / "estimates_k-0.csv"));
}

TEST(Scenario, OracleOnlySkipsMonteCarlo) {
  const fs::path dir = scratch("oracle");
  run_scenario(small_custom(1e-4), into(dir, true));
  EXPECT_TRUE(fs::exists(dir / "expected_k-0.csv"));
  EXPECT_FALSE(fs::exists(dir / "estimates_k-0.csv"));
  EXPECT_TRUE(read_json_file(dir / "manifest.json")["oracle_only"].get<bool>());
}

TEST(Scenario, MidRunFailureLeavesErrorManifest) {
  const fs::path dir = scratch("failure");
  json doc = small_custom(1e-4);
  doc["waveform"]["amplitude_cap_rad_per_s"] = 1.0;  // far below the normalized amplitude
  EXPECT_THROW(run_scenario(doc, into(dir)), ParameterError);
  const json manifest = read_json_file(dir / "manifest.json");
  EXPECT_EQ(manifest["status"], "error");
  EXPECT_TRUE(manifest["error"].contains("message"));
  EXPECT_TRUE(fs::exists(dir / "true_psd.csv"));
}

TEST(Scenario, InvalidConfigFailsBeforeWriting) {
  const fs::path dir = scratch("invalid");
  json doc = small_custom(1e-4);
  doc["waveform"]["w"] = 0.7;
  try {
    run_scenario(doc, into(dir));
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "/waveform/w");
  }
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Scenario, SimulateSettingIsDeterministic) {
  const auto cfg = parse_scenario_config(small_custom(1e-4));
  const auto tapers = compute_dpss(cfg.waveform.params(), 0);
  const auto settings = dpss_settings(cfg.waveform, tapers[0], cfg.shifts, cfg.integration, 1);
  const auto a = simulate_setting(settings[2], cfg.psd, cfg.simulation, 300, SignalModel::kLinear, 77);
  const auto b = simulate_setting(settings[2], cfg.psd, cfg.simulation, 300, SignalModel::kLinear, 77);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Scenario, CsSettingsAddBothMembers) {
  json doc = small_custom(1e-4);
  doc["waveform"]["modulation"] = "cs";
  const auto cfg = parse_scenario_config(doc);
  const auto tapers = compute_dpss(cfg.waveform.params(), 0);
  const auto settings = dpss_settings(cfg.waveform, tapers[0], cfg.shifts, cfg.integration, 1);
  ASSERT_EQ(settings[1].members.size(), 2u);
  EXPECT_NEAR(settings[1].members[0].power() + settings[1].members[1].power(), 900.0, 1e-9);
  const auto r = simulate_setting(settings[1], cfg.psd, cfg.simulation, 100, SignalModel::kLinear, 3);
  EXPECT_EQ(r.counts.size(), 2u);
}

TEST(Scenario, RseWaveformSampleCount) {
  for (int n : {0, 1, 3, 7}) {
    const Waveform w = rse_waveform(n, 2e-3, 500, 900.0);
    EXPECT_GE(w.size(), 500);
    if (n > 0) {
      EXPECT_EQ(w.size() % (2 * n), 0);
    }
    EXPECT_NEAR(w.power(), 900.0, 1e-9);
  }
}

TEST(Scenario, ManifestRecordsVersionsAndUnits) {
  const fs::path dir = scratch("manifest");
  const auto outcome = run_scenario(small_custom(0.0), into(dir, true));
  const json& m = outcome.manifest;
  for (const char* key : {"manifest_version", "scenario", "seed", "units", "versions", "config", "files", "elapsed_s"})
    EXPECT_TRUE(m.contains(key)) << key;
  EXPECT_EQ(m["versions"]["slepqns"], library_version());
  EXPECT_EQ(scenario_document_from(m), m["config"]);
}
