#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slepqns/errors.hpp"
#include "slepqns/estimation.hpp"
#include "slepqns/io.hpp"
#include "slepqns/scenario.hpp"
#include "slepqns/scenario_config.hpp"
#include "slepqns/slepian.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slepqns;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Exit codes beyond CLI11's own usage codes.
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;
constexpr int kExitOther = 1;

// Writes to the named file, or to stdout when the name is empty or "-".
void emit(const std::string& target, const std::string& content) {
  if (target.empty() || target == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  const fs::path path(target);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + target + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing " + target);
}

struct DpssArgs {
  int n = 0;
  double w = 0.0;
  int orders = 1;
  std::optional<double> dt;
  int points = 1024;
  std::string out;
};

void run_dpss(const DpssArgs& a) {
  const DpssParams params{a.n, a.w};
  params.validate();
  if (a.orders < 1 || a.orders > a.n) throw ParameterError("--orders must lie in [1, n]");
  const auto tapers = compute_dpss(params, a.orders - 1);
  std::ostringstream csv;
  if (!a.dt) {
    write_tapers_csv(tapers, csv);
  } else {
    // DPSWF magnitudes on [0, omega_N].
    if (!(*a.dt > 0.0)) throw ParameterError("--dt must be positive");
    if (a.points < 2) throw ParameterError("--points must be at least 2");
    const double nyquist = std::numbers::pi / *a.dt;
    std::vector<std::string> header{"omega_rad_per_s"};
    std::vector<std::vector<double>> columns(1);
    for (int i = 0; i < a.points; ++i) columns[0].push_back(nyquist * i / (a.points - 1));
    for (const auto& t : tapers) {
      header.push_back("u" + std::to_string(t.order));
      std::vector<double> col;
      col.reserve(columns[0].size());
      for (double om : columns[0]) col.push_back(dpswf_eval(t, *a.dt, om));
      columns.push_back(std::move(col));
    }
    write_columns_csv(csv, header, columns);
  }
  emit(a.out, csv.str());
}

struct FilterArgs {
  std::string config;
  int n = 500;
  double dt = 4e-6;
  double w = 0.002;
  int order = 0;
  double shift_hz = 0.0;
  std::string modulation = "cos";
  double power = 900.0;
  std::optional<double> max_hz;
  int points = 1024;
  bool passband = false;
  std::string out;
};

void run_filter(const FilterArgs& a) {
  WaveformSpec spec;
  double omega_s = kTwoPi * a.shift_hz;
  int order = a.order;
  IntegrationOptions integration;
  if (!a.config.empty()) {
    // An experiment document, as for simulate.
    const ExperimentDocument doc = parse_experiment_document(read_json_file(a.config));
    spec = doc.waveform;
    omega_s = doc.shift;
    order = doc.order;
    integration = doc.integration;
  } else {
    json wf{{"n", a.n}, {"dt_s", a.dt}, {"w", a.w}, {"orders", a.order + 1},
            {"modulation", a.modulation}, {"power_rad2_per_s", a.power}};
    spec = waveform_from_json(wf, "--waveform");
    if (!(omega_s < spec.nyquist())) throw ParameterError("--shift-hz must lie below the Nyquist frequency");
  }
  const auto tapers = compute_dpss(spec.params(), order);
  std::vector<Waveform> members{build_waveform(spec, tapers[order], omega_s)};
  if (spec.cs) members.push_back(build_cs_partner(spec, tapers[order], omega_s));
  const Setting s = make_setting(std::move(members), omega_s, spec.w, spec.dt, integration);

  const double hi = a.max_hz ? kTwoPi * *a.max_hz : spec.nyquist();
  if (!(hi > 0.0)) throw ParameterError("--max-hz must be positive");
  if (a.points < 2) throw ParameterError("--points must be at least 2");
  std::vector<double> omega(a.points);
  for (int i = 0; i < a.points; ++i) omega[i] = hi * i / (a.points - 1);

  std::ostringstream csv;
  write_filter_csv(s.filter, omega, csv);
  emit(a.out, csv.str());
  if (a.passband) {
    std::cerr << "passband_lo_rad_per_s=" << s.passband.lo << " passband_hi_rad_per_s=" << s.passband.hi
              << " area=" << s.passband.area << "\n";
  }
}

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool oracle_only = false;
  std::string out;
};

struct SimulatedExperiment {
  ExperimentDocument doc;
  Setting setting;
};

SimulatedExperiment experiment_setting(const json& document) {
  SimulatedExperiment e{parse_experiment_document(document), {}};
  const auto tapers = compute_dpss(e.doc.waveform.params(), e.doc.order);
  const Taper& taper = tapers[e.doc.order];
  std::vector<Waveform> members{build_waveform(e.doc.waveform, taper, e.doc.shift)};
  if (e.doc.waveform.cs) members.push_back(build_cs_partner(e.doc.waveform, taper, e.doc.shift));
  e.setting = make_setting(std::move(members), e.doc.shift, e.doc.waveform.w, e.doc.waveform.dt, e.doc.integration);
  return e;
}

json passband_json(const PassbandSpec& pb) {
  return {{"center_rad_per_s", pb.center}, {"half_width_rad_per_s", pb.half_width},
          {"lo_rad_per_s", pb.lo},         {"hi_rad_per_s", pb.hi},
          {"area", pb.area}};
}

void run_simulate(const SimulateArgs& a) {
  json document = read_json_file(a.config);
  if (a.seed) document["seed"] = *a.seed;
  const SimulatedExperiment e = experiment_setting(document);
  const double signal = expected_signal(e.doc.psd, e.setting.filter, e.doc.integration);
  const SignalModel model = e.doc.simulation.signal_model;

  json out{{"schema_version", kScenarioSchemaVersion},
           {"kind", "experiment"},
           {"config", e.doc.document},
           {"units", {{"omega", "rad/s"}, {"config_frequencies", "Hz"}, {"omega_from_hz", "2*pi*f"}}},
           {"omega_s_rad_per_s", e.doc.shift},
           {"order", e.doc.order},
           {"passband", passband_json(e.setting.passband)},
           {"expected_signal", signal},
           {"expected_estimate", e.setting.passband.area > 0.0 ? signal / e.setting.passband.area : 0.0},
           {"expected_shot_variance", expected_shot_variance(model, signal)}};
  if (!a.oracle_only) {
    const ExperimentResult r = simulate_setting(e.setting, e.doc.psd, e.doc.simulation, e.doc.simulation.shots, model,
                                                e.doc.seed, a.threads.value_or(1));
    EstimateRecord rec = eigenestimate(r, e.setting.passband);
    rec.order = e.doc.order;
    rec.tag = "k=" + std::to_string(e.doc.order);
    out["result"] = to_json(r);
    out["estimate"] = to_json(rec);
  }
  emit(a.out, out.dump(2) + "\n");
}

struct EstimateArgs {
  std::vector<std::string> inputs;
  bool aqm = false;
  std::string json_out;
  std::string out;
};

struct LoadedResult {
  SimulatedExperiment experiment;
  ExperimentResult result;
  EstimateRecord record;
};

std::vector<EstimateRecord> sorted_by_shift(std::vector<EstimateRecord> v) {
  std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.omega_s < y.omega_s; });
  return v;
}

void run_estimate(const EstimateArgs& a) {
  std::vector<LoadedResult> loaded;
  for (const auto& path : a.inputs) {
    const json j = read_json_file(path);
    if (!j.contains("config") || !j.contains("result"))
      throw ConfigError("/", path + " is not a simulate output with Monte Carlo results");
    LoadedResult l{experiment_setting(j.at("config")), experiment_result_from_json(j.at("result")), {}};
    l.record = eigenestimate(l.result, l.experiment.setting.passband);
    l.record.order = l.experiment.doc.order;
    l.record.tag = "k=" + std::to_string(l.record.order);
    loaded.push_back(std::move(l));
  }

  std::map<int, std::vector<EstimateRecord>> by_order;
  for (const auto& l : loaded) by_order[l.record.order].push_back(l.record);

  json doc{{"estimates", json::array()}};
  std::vector<std::string> header{"omega_rad_per_s", "estimate_per_hz", "std_dev_per_hz", "order"};
  std::vector<std::vector<double>> columns(4);
  for (auto& [order, recs] : by_order) {
    for (const auto& r : sorted_by_shift(recs)) {
      columns[0].push_back(r.omega_s);
      columns[1].push_back(r.value);
      columns[2].push_back(r.std_dev());
      columns[3].push_back(order);
      doc["estimates"].push_back(to_json(r));
    }
  }

  if (a.aqm) {
    // Requires every order on the same shift grid.
    std::vector<double> shifts;
    for (const auto& r : sorted_by_shift(by_order.begin()->second)) shifts.push_back(r.omega_s);
    const int k_count = static_cast<int>(by_order.size());
    std::vector<std::vector<TaperChannel>> channels(shifts.size(), std::vector<TaperChannel>(k_count));
    std::vector<std::vector<bool>> seen(shifts.size(), std::vector<bool>(k_count, false));
    std::map<int, int> order_index;
    for (const auto& [order, recs] : by_order) order_index.emplace(order, static_cast<int>(order_index.size()));
    for (const auto& l : loaded) {
      const auto it = std::find(shifts.begin(), shifts.end(), l.record.omega_s);
      if (it == shifts.end()) throw ParameterError("--aqm needs every order measured on the same shift grid");
      const auto p = static_cast<std::size_t>(it - shifts.begin());
      const int k = order_index.at(l.record.order);
      if (seen[p][k]) throw ParameterError("--aqm got two results for one order and shift");
      seen[p][k] = true;
      const Setting& s = l.experiment.setting;
      const IntegrationOptions& opt = l.experiment.doc.integration;
      channels[p][k] = {l.record, broadband_bias_row(shifts, s.passband, s.filter, opt),
                        local_bias_moment(s.passband, s.filter, opt)};
    }
    for (const auto& row : seen)
      if (std::find(row.begin(), row.end(), false) != row.end())
        throw ParameterError("--aqm needs one result per order at every shift");
    const auto aqm = adaptive_multitaper(shifts, channels);
    for (const auto& r : aqm) {
      columns[0].push_back(r.omega_s);
      columns[1].push_back(r.value);
      columns[2].push_back(r.std_dev());
      columns[3].push_back(-1);
      doc["estimates"].push_back(to_json(r));
    }
  }

  std::ostringstream csv;
  write_columns_csv(csv, header, columns);
  emit(a.out, csv.str());
  if (!a.json_out.empty()) emit(a.json_out, doc.dump(2) + "\n");
}

struct ScenarioArgs {
  std::string name;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  bool oracle_only = false;
  bool print_defaults = false;
};

int run_scenario_command(const ScenarioArgs& a) {
  json document;
  if (!a.config.empty()) document = scenario_document_from(read_json_file(a.config));
  if (!a.name.empty()) {
    parse_scenario_kind(a.name);
    if (document.contains("scenario") && document["scenario"] != a.name)
      throw ConfigError("/scenario", "config names scenario " + document["scenario"].dump() + " but --name is " + a.name);
    document["scenario"] = a.name;
  }
  if (!document.is_object() || !document.contains("scenario"))
    throw ConfigError("/scenario", "give --name or a config with a scenario key");
  if (!document.contains("schema_version")) document["schema_version"] = kScenarioSchemaVersion;

  if (a.print_defaults) {
    std::cout << default_scenario_document(parse_scenario_kind(document["scenario"].get<std::string>())).dump(2)
              << "\n";
    return 0;
  }

  ScenarioRunOptions opts;
  if (!a.out.empty()) opts.output_dir = a.out;
  opts.seed = a.seed;
  opts.threads = a.threads;
  opts.oracle_only = a.oracle_only;
  const ScenarioOutcome outcome = run_scenario(document, opts);
  std::cout << outcome.directory.string() << "\n";
  return outcome.ok ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slepian quantum noise spectroscopy toolkit"};
  app.set_version_flag("--version", library_version());
  app.require_subcommand(1);

  DpssArgs dpss;
  auto* c_dpss = app.add_subcommand("dpss", "Discrete prolate spheroidal sequences as CSV");
  c_dpss->add_option("--n", dpss.n, "Sequence length N")->required()->check(CLI::PositiveNumber);
  c_dpss->add_option("--w", dpss.w, "Half-bandwidth W in cycles per sample")->required();
  c_dpss->add_option("--orders", dpss.orders, "Number of tapers (orders 0..orders-1)")->check(CLI::PositiveNumber);
  c_dpss->add_option("--dt", dpss.dt, "Sample interval in s; emits DPSWFs on [0, pi/dt] instead of tapers");
  c_dpss->add_option("--points", dpss.points, "Frequency points for DPSWF output");
  c_dpss->add_option("--out", dpss.out, "Output file (stdout by default)");

  FilterArgs filter;
  auto* c_filter = app.add_subcommand("filter", "Filter function of one DPSS waveform as CSV");
  c_filter->add_option("--config", filter.config, "Experiment document; replaces the waveform options")
      ->check(CLI::ExistingFile);
  c_filter->add_option("--n", filter.n, "Sequence length N");
  c_filter->add_option("--dt", filter.dt, "Sample interval in s");
  c_filter->add_option("--w", filter.w, "Half-bandwidth W in cycles per sample");
  c_filter->add_option("--order", filter.order, "Taper order");
  c_filter->add_option("--shift-hz", filter.shift_hz, "Shift frequency in Hz");
  c_filter->add_option("--modulation", filter.modulation, "none, cos, sin, ssb or cs");
  c_filter->add_option("--power", filter.power, "Normalization target in rad^2/s");
  c_filter->add_option("--max-hz", filter.max_hz, "Upper frequency of the output grid in Hz (default Nyquist)");
  c_filter->add_option("--points", filter.points, "Number of frequency points");
  c_filter->add_flag("--passband", filter.passband, "Print passband bounds and area to stderr");
  c_filter->add_option("--out", filter.out, "Output file (stdout by default)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run one simulated experiment from an experiment document");
  c_sim->add_option("--config", sim.config, "Experiment document (JSON)")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--seed", sim.seed, "Overrides the document seed");
  c_sim->add_option("--threads", sim.threads, "Worker threads")->check(CLI::PositiveNumber);
  c_sim->add_flag("--oracle-only", sim.oracle_only, "Expected values only, no Monte Carlo");
  c_sim->add_option("--out", sim.out, "Output JSON file (stdout by default)");

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Eigenestimates (and optionally AQM) from simulate outputs");
  c_est->add_option("--input", est.inputs, "simulate output files")->required()->check(CLI::ExistingFile);
  c_est->add_flag("--aqm", est.aqm, "Also run the adaptive multitaper over all orders");
  c_est->add_option("--json", est.json_out, "Also write estimate records as JSON");
  c_est->add_option("--out", est.out, "Output CSV file (stdout by default)");

  ScenarioArgs sc;
  auto* c_sc = app.add_subcommand("scenario", "Run a scenario and write its output bundle");
  c_sc->add_option("--name", sc.name, "lorentzian-vs-rse, comb-vs-dpss, detect-line, bayes-refine or custom");
  c_sc->add_option("--config", sc.config, "Scenario document or a manifest.json from an earlier run")
      ->check(CLI::ExistingFile);
  c_sc->add_option("--seed", sc.seed, "Overrides the config seed");
  c_sc->add_option("--threads", sc.threads, "Worker threads")->check(CLI::PositiveNumber);
  c_sc->add_option("--out", sc.out, "Output directory");
  c_sc->add_flag("--oracle-only", sc.oracle_only, "Expected values only, no Monte Carlo");
  c_sc->add_flag("--print-defaults", sc.print_defaults, "Print the default document of the scenario and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (c_dpss->parsed()) run_dpss(dpss);
    if (c_filter->parsed()) run_filter(filter);
    if (c_sim->parsed()) run_simulate(sim);
    if (c_est->parsed()) run_estimate(est);
    if (c_sc->parsed()) return run_scenario_command(sc);
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return 0;
}
