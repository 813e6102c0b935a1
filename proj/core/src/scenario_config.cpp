#include "slepqns/scenario_config.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <utility>

#include "slepqns/errors.hpp"

namespace slepqns {
namespace {

using nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

const char* type_name(const json& j) { return j.type_name(); }

// Reads one JSON object, remembering which keys were consumed so that
// finish() can reject everything else.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, std::string("expected an object, found ") + type_name(j_));
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key), "required key is missing");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key), std::string("expected a number, found ") + type_name(v));
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key), "must be finite");
    return x;
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : (used_.insert(key), fallback); }

  double positive(const std::string& key) {
    const double x = number(key);
    if (!(x > 0.0)) throw ConfigError(at(key), "must be positive");
    return x;
  }
  double positive(const std::string& key, double fallback) {
    return has(key) ? positive(key) : (used_.insert(key), fallback);
  }
  double non_negative(const std::string& key, double fallback) {
    if (!has(key)) return used_.insert(key), fallback;
    const double x = number(key);
    if (x < 0.0) throw ConfigError(at(key), "must be non-negative");
    return x;
  }

  long long integer(const std::string& key, long long min) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(at(key), std::string("expected an integer, found ") + type_name(v));
    const long long x = v.get<long long>();
    if (x < min) throw ConfigError(at(key), "must be at least " + std::to_string(min));
    return x;
  }
  long long integer(const std::string& key, long long min, long long fallback) {
    return has(key) ? integer(key, min) : (used_.insert(key), fallback);
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return used_.insert(key), fallback;
    const json& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError(at(key), "expected a non-negative integer");
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return used_.insert(key), fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(at(key), std::string("expected a boolean, found ") + type_name(v));
    return v.get<bool>();
  }

  std::string text(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(at(key), std::string("expected a string, found ") + type_name(v));
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    return has(key) ? text(key) : (used_.insert(key), fallback);
  }

  template <class F>
  auto parsed(const std::string& key, F&& parse) {
    const std::string s = text(key);
    try {
      return parse(s);
    } catch (const ParameterError& e) {
      throw ConfigError(at(key), e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key) && !value.is_null()) throw ConfigError(at(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// Objects merge key by key; the listed keys and all arrays are replaced whole.
void merge_into(json& base, const json& patch, const std::string& path) {
  static const std::set<std::string> kReplaced = {"psd", "shifts", "prior"};
  if (!patch.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object() && !kReplaced.count(key)) {
      merge_into(base[key], value, path + "/" + key);
    } else {
      base[key] = value;
    }
  }
}

json waveform_doc(int n, double dt, double w, int orders, const char* modulation) {
  return {{"n", n}, {"dt_s", dt}, {"w", w}, {"orders", orders}, {"modulation", modulation}, {"power_rad2_per_s", 900.0}};
}

json grid_doc(double start, double step, int count) { return {{"start_hz", start}, {"step_hz", step}, {"count", count}}; }

SimulationSpec simulation_from_json(const json& j, const std::string& path) {
  ObjectReader sim(j, path);
  SimulationSpec out;
  out.shots = static_cast<int>(sim.integer("shots", 1));
  out.oversampling = static_cast<int>(sim.integer("oversampling", 1, 8));
  out.block_factor = static_cast<int>(sim.integer("block_factor", 1, 4));
  if (sim.has("signal_model")) out.signal_model = sim.parsed("signal_model", parse_signal_model);
  if (sim.has("axes")) {
    out.axes.clear();
    const json& axes = sim.raw("axes");
    if (!axes.is_array() || axes.empty()) throw ConfigError(sim.at("axes"), "expected a non-empty array");
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const std::string p = sim.at("axes") + "/" + std::to_string(i);
      if (!axes[i].is_string()) throw ConfigError(p, "expected \"x\", \"y\" or \"z\"");
      try {
        out.axes.push_back(parse_axis(axes[i].get<std::string>()));
      } catch (const ParameterError& e) {
        throw ConfigError(p, e.what());
      }
    }
  }
  sim.finish();
  return out;
}

IntegrationOptions integration_from_json(const json& j, const std::string& path) {
  ObjectReader in(j, path);
  IntegrationOptions out;
  out.cutoff_factor = in.positive("cutoff_factor", 8.0);
  out.tail_correction = in.boolean("tail_correction", true);
  out.rel_tol = in.positive("rel_tol", 1e-8);
  in.finish();
  return out;
}

}  // namespace

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kLorentzianVsRse: return "lorentzian-vs-rse";
    case ScenarioKind::kCombVsDpss: return "comb-vs-dpss";
    case ScenarioKind::kDetectLine: return "detect-line";
    case ScenarioKind::kBayesRefine: return "bayes-refine";
    case ScenarioKind::kCustom: return "custom";
  }
  return "custom";
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  for (auto k : {ScenarioKind::kLorentzianVsRse, ScenarioKind::kCombVsDpss, ScenarioKind::kDetectLine,
                 ScenarioKind::kBayesRefine, ScenarioKind::kCustom}) {
    if (to_string(k) == name) return k;
  }
  throw ParameterError("unknown scenario '" + name +
                       "' (expected lorentzian-vs-rse, comb-vs-dpss, detect-line, bayes-refine or custom)");
}

double WaveformSpec::nyquist() const { return std::numbers::pi / dt; }

Waveform build_waveform(const WaveformSpec& spec, const Taper& taper, double omega_s) {
  Waveform out;
  if (spec.cs) {
    out = normalize_pair_power(cs_pair(taper, 1.0, spec.dt, omega_s), spec.power).first;
  } else {
    out = normalize_power(modulate(dpss_waveform(taper, 1.0, spec.dt), spec.modulation, omega_s), spec.power);
  }
  if (spec.amplitude_cap) enforce_amplitude_cap(out, *spec.amplitude_cap);
  return out;
}

Waveform build_cs_partner(const WaveformSpec& spec, const Taper& taper, double omega_s) {
  if (!spec.cs) throw ParameterError("waveform family is not a CS pair");
  Waveform out = normalize_pair_power(cs_pair(taper, 1.0, spec.dt, omega_s), spec.power).second;
  if (spec.amplitude_cap) enforce_amplitude_cap(out, *spec.amplitude_cap);
  return out;
}

CombProtocol CombSpec::protocol(double base_duration) const {
  CombProtocol p;
  p.base_duration = base_duration;
  p.h_max = h_max;
  p.repetitions = repetitions;
  p.switches = switches;
  p.samples_per_base = samples_per_base;
  p.power = power;
  return p;
}

PsdModel psd_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string kind = r.text("kind");
  PsdModel model;
  if (kind == "flat") {
    Flat f;
    f.level = r.non_negative("level_per_hz", 0.0);
    if (r.has("cutoff_hz")) f.cutoff = kTwoPi * r.positive("cutoff_hz");
    model = PsdModel(f);
  } else if (kind == "lorentzian") {
    Lorentzian l;
    l.amplitude = r.non_negative("amplitude_per_hz", 0.0);
    l.center = kTwoPi * r.non_negative("center_hz", 0.0);
    l.width = kTwoPi * r.positive("width_hz");
    model = PsdModel(l);
  } else if (kind == "gaussian-mix") {
    GaussianMix g;
    const json& peaks = r.raw("peaks");
    if (!peaks.is_array() || peaks.empty()) throw ConfigError(r.at("peaks"), "expected a non-empty array");
    for (std::size_t i = 0; i < peaks.size(); ++i) {
      ObjectReader p(peaks[i], r.at("peaks") + "/" + std::to_string(i));
      GaussianPeak peak;
      peak.amplitude = p.non_negative("amplitude_per_hz", 0.0);
      peak.center = kTwoPi * p.non_negative("center_hz", 0.0);
      peak.sigma = kTwoPi * p.positive("sigma_hz");
      p.finish();
      g.peaks.push_back(peak);
    }
    model = PsdModel(g);
  } else if (kind == "white-plus-line") {
    WhitePlusLine w;
    w.floor = r.non_negative("floor_per_hz", 0.0);
    w.line.amplitude = r.non_negative("amplitude_per_hz", 0.0);
    w.line.center = kTwoPi * r.non_negative("center_hz", 0.0);
    w.line.width = kTwoPi * r.positive("width_hz");
    w.cutoff = kTwoPi * r.positive("cutoff_hz");
    model = PsdModel(w);
  } else {
    throw ConfigError(r.at("kind"), "unknown PSD kind '" + kind +
                                        "' (expected flat, lorentzian, gaussian-mix or white-plus-line)");
  }
  r.finish();
  return model;
}

json psd_to_json(const PsdModel& model) {
  struct Visitor {
    json operator()(const Flat& f) const {
      json j{{"kind", "flat"}, {"level_per_hz", f.level}};
      if (std::isfinite(f.cutoff)) j["cutoff_hz"] = f.cutoff / kTwoPi;
      return j;
    }
    json operator()(const Lorentzian& l) const {
      return {{"kind", "lorentzian"},
              {"amplitude_per_hz", l.amplitude},
              {"center_hz", l.center / kTwoPi},
              {"width_hz", l.width / kTwoPi}};
    }
    json operator()(const GaussianMix& g) const {
      json peaks = json::array();
      for (const auto& p : g.peaks) {
        peaks.push_back({{"amplitude_per_hz", p.amplitude}, {"center_hz", p.center / kTwoPi}, {"sigma_hz", p.sigma / kTwoPi}});
      }
      return {{"kind", "gaussian-mix"}, {"peaks", peaks}};
    }
    json operator()(const WhitePlusLine& w) const {
      return {{"kind", "white-plus-line"},         {"floor_per_hz", w.floor},
              {"amplitude_per_hz", w.line.amplitude}, {"center_hz", w.line.center / kTwoPi},
              {"width_hz", w.line.width / kTwoPi},   {"cutoff_hz", w.cutoff / kTwoPi}};
    }
  };
  return std::visit(Visitor{}, model.variant());
}

WaveformSpec waveform_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  WaveformSpec s;
  s.n = static_cast<int>(r.integer("n", 2));
  s.dt = r.positive("dt_s");
  s.w = r.positive("w");
  if (!(s.w < 0.5)) throw ConfigError(r.at("w"), "must lie in (0, 1/2)");
  s.orders = static_cast<int>(r.integer("orders", 1, 1));
  if (s.orders > s.n) throw ConfigError(r.at("orders"), "cannot exceed n");
  const std::string mod = r.text("modulation", "cos");
  if (mod == "cs") {
    s.cs = true;
    s.modulation = Modulation::kCos;
  } else {
    try {
      s.modulation = parse_modulation(mod);
    } catch (const ParameterError& e) {
      throw ConfigError(r.at("modulation"), e.what());
    }
  }
  s.power = r.positive("power_rad2_per_s", 900.0);
  if (r.has("amplitude_cap_rad_per_s")) s.amplitude_cap = r.positive("amplitude_cap_rad_per_s");
  r.finish();
  return s;
}

std::vector<double> shifts_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  std::vector<double> out;
  if (r.has("values_hz")) {
    const json& v = r.raw("values_hz");
    if (!v.is_array() || v.empty()) throw ConfigError(r.at("values_hz"), "expected a non-empty array of numbers");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(r.at("values_hz") + "/" + std::to_string(i), "expected a number");
      const double f = v[i].get<double>();
      if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError(r.at("values_hz") + "/" + std::to_string(i), "must be >= 0");
      out.push_back(kTwoPi * f);
    }
  } else {
    const double start = r.non_negative("start_hz", 0.0);
    const double step = r.positive("step_hz");
    const long long count = r.integer("count", 1);
    for (long long p = 0; p < count; ++p) out.push_back(kTwoPi * (start + static_cast<double>(p) * step));
  }
  r.finish();
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i] > out[i - 1])) throw ConfigError(path, "shift frequencies must be strictly increasing");
  }
  return out;
}

json default_scenario_document(ScenarioKind kind) {
  json doc{{"schema_version", kScenarioSchemaVersion},
           {"scenario", to_string(kind)},
           {"seed", 1},
           {"threads", 1},
           {"output_dir", "out"},
           {"oracle_only", false},
           {"integration", {{"cutoff_factor", 8.0}, {"tail_correction", true}, {"rel_tol", 1e-8}}},
           {"output", {{"filter_points", 1024}}}};
  auto simulation = [](int shots, const char* model) {
    return json{{"shots", shots}, {"oversampling", 8}, {"block_factor", 4}, {"signal_model", model}, {"axes", {"z"}}};
  };
  const json detection_psd{{"kind", "white-plus-line"}, {"floor_per_hz", 2e-4}, {"amplitude_per_hz", 4e-3},
                           {"center_hz", 7960.0},       {"width_hz", 80.0},     {"cutoff_hz", 17500.0}};
  const json detection{{"tapers", 13},
                       {"ssqm_seed", 7},
                       {"covariance_term", true},
                       {"segments", {{"width_hz", 150.0}, {"count", 94}}},
                       {"aqm", {{"tolerance", 1e-6}, {"max_iterations", 50}, {"initial", "equal"}, {"local_bias", true}}},
                       {"ssqm", {{"grid_points", 512}, {"random_starts", 8}, {"leakage_weight", 0.0}, {"max_iterations", 4000}}}};
  switch (kind) {
    case ScenarioKind::kLorentzianVsRse:
      doc["psd"] = {{"kind", "lorentzian"}, {"amplitude_per_hz", 4e-4}, {"center_hz", 4620.0}, {"width_hz", 1110.0}};
      doc["waveform"] = waveform_doc(500, 4e-6, 1.0 / 500, 1, "cos");
      doc["shifts"] = grid_doc(0.0, 250.0, 41);  // n pi / T for n = 0..40, T = 2 ms
      doc["simulation"] = simulation(2000, "linear");
      doc["rse"] = {{"enabled", true}};
      break;
    case ScenarioKind::kCombVsDpss: {
      doc["psd"] = {{"kind", "gaussian-mix"},
                    {"peaks",
                     {{{"amplitude_per_hz", 0.5e-3}, {"center_hz", 0.0}, {"sigma_hz", 3500.0}},
                      {{"amplitude_per_hz", 0.35e-3}, {"center_hz", 23900.0}, {"sigma_hz", 6210.0}}}}};
      const double harmonic = 1.0 / 942e-6;
      doc["panels"] = {{{"waveform", waveform_doc(260, 39.3e-6, 1.0 / 260, 1, "cos")}, {"shifts", grid_doc(0.0, harmonic, 12)}},
                       {{"waveform", waveform_doc(1000, 10.2e-6, 1.0 / 1000, 1, "cos")}, {"shifts", grid_doc(0.0, harmonic, 46)}}};
      doc["comb"] = {{"base_durations_s", {942e-6, 245e-6}},
                     {"h_max", 12},
                     {"repetitions", 20},
                     {"switches", 2},
                     {"samples_per_base", 64},
                     {"power_rad2_per_s", 900.0},
                     {"expectation", "both"}};
      doc["simulation"] = simulation(2000, "linear");
      break;
    }
    case ScenarioKind::kDetectLine:
    case ScenarioKind::kBayesRefine:
      doc["psd"] = detection_psd;
      doc["waveform"] = waveform_doc(500, 8e-6, 7.0 / 500, 13, "cos");
      doc["shifts"] = grid_doc(0.0, 1750.0, 9);
      doc["simulation"] = simulation(2600, "linear");
      doc["detection"] = detection;
      if (kind == ScenarioKind::kBayesRefine) {
        doc["refinement"] = {{"waveform", waveform_doc(500, 20e-6, 1.0 / 500, 1, "cos")},
                             {"shifts", grid_doc(5450.0, 150.0, 34)},
                             {"shots", 2600},
                             {"signal_model", "gaussian-inversion"},
                             {"prior", {{"kind", "fisher"}, {"lambda", "mean-scale"}, {"condition_limit", 1e10}}},
                             {"credible_level", 0.95}};
      }
      break;
    case ScenarioKind::kCustom:
      doc["psd"] = {{"kind", "flat"}, {"level_per_hz", 0.0}};
      doc["waveform"] = waveform_doc(500, 4e-6, 1.0 / 500, 1, "cos");
      doc["shifts"] = grid_doc(0.0, 1000.0, 10);
      doc["simulation"] = simulation(1000, "linear");
      break;
  }
  return doc;
}

ScenarioConfig parse_scenario_config(const json& document) {
  ObjectReader top(document, "");
  const json& version = top.raw("schema_version");
  if (!version.is_number_integer() || version.get<int>() != kScenarioSchemaVersion) {
    throw ConfigError("/schema_version", "unsupported schema version (expected " +
                                             std::to_string(kScenarioSchemaVersion) + ")");
  }
  const ScenarioKind kind = top.parsed("scenario", parse_scenario_kind);

  json merged = default_scenario_document(kind);
  merge_into(merged, document, "");

  ScenarioConfig cfg;
  cfg.kind = kind;
  cfg.document = merged;
  ObjectReader r(merged, "");
  r.raw("schema_version");
  r.raw("scenario");
  cfg.seed = r.unsigned64("seed", 1);
  cfg.threads = static_cast<int>(r.integer("threads", 1, 1));
  cfg.output_dir = r.text("output_dir", "out");
  cfg.oracle_only = r.boolean("oracle_only", false);
  cfg.psd = psd_from_json(r.raw("psd"), "/psd");

  cfg.integration = integration_from_json(r.raw("integration"), "/integration");
  {
    ObjectReader out(r.raw("output"), "/output");
    cfg.filter_points = static_cast<int>(out.integer("filter_points", 2, 1024));
    out.finish();
  }
  cfg.simulation = simulation_from_json(r.raw("simulation"), "/simulation");

  auto check_shifts = [](const std::vector<double>& shifts, const WaveformSpec& w, const std::string& path) {
    for (std::size_t i = 0; i < shifts.size(); ++i) {
      if (!(shifts[i] < w.nyquist())) {
        throw ConfigError(path + "/" + std::to_string(i), "shift frequency must lie below the Nyquist frequency " +
                                                              std::to_string(w.nyquist() / kTwoPi) + " Hz");
      }
    }
  };

  if (kind != ScenarioKind::kCombVsDpss) {
    cfg.waveform = waveform_from_json(r.raw("waveform"), "/waveform");
    cfg.shifts = shifts_from_json(r.raw("shifts"), "/shifts");
    check_shifts(cfg.shifts, cfg.waveform, "/shifts");
  }

  if (kind == ScenarioKind::kLorentzianVsRse) {
    ObjectReader rse(r.raw("rse"), "/rse");
    cfg.rse = rse.boolean("enabled", true);
    rse.finish();
  }

  if (kind == ScenarioKind::kCombVsDpss) {
    const json& panels = r.raw("panels");
    if (!panels.is_array()) throw ConfigError("/panels", "expected an array");
    for (std::size_t i = 0; i < panels.size(); ++i) {
      const std::string p = "/panels/" + std::to_string(i);
      ObjectReader pr(panels[i], p);
      DpssPanel panel;
      panel.waveform = waveform_from_json(pr.raw("waveform"), p + "/waveform");
      panel.shifts = shifts_from_json(pr.raw("shifts"), p + "/shifts");
      check_shifts(panel.shifts, panel.waveform, p + "/shifts");
      pr.finish();
      cfg.panels.push_back(std::move(panel));
    }
    ObjectReader c(r.raw("comb"), "/comb");
    const json& tb = c.raw("base_durations_s");
    if (!tb.is_array() || tb.empty()) throw ConfigError("/comb/base_durations_s", "expected a non-empty array");
    for (std::size_t i = 0; i < tb.size(); ++i) {
      if (!tb[i].is_number() || !(tb[i].get<double>() > 0.0))
        throw ConfigError("/comb/base_durations_s/" + std::to_string(i), "expected a positive number");
      cfg.comb.base_durations.push_back(tb[i].get<double>());
    }
    cfg.comb.h_max = static_cast<int>(c.integer("h_max", 1, 12));
    cfg.comb.repetitions = static_cast<int>(c.integer("repetitions", 1, 20));
    cfg.comb.switches = static_cast<int>(c.integer("switches", 1, 2));
    cfg.comb.samples_per_base = static_cast<int>(c.integer("samples_per_base", 2, 64));
    cfg.comb.power = c.positive("power_rad2_per_s", 900.0);
    const std::string e = c.text("expectation", "both");
    if (e != "exact" && e != "delta-comb" && e != "both")
      throw ConfigError("/comb/expectation", "expected \"exact\", \"delta-comb\" or \"both\"");
    cfg.comb.exact = e != "delta-comb";
    cfg.comb.delta_comb = e != "exact";
    c.finish();
    try {
      for (double t : cfg.comb.base_durations) cfg.comb.protocol(t).validate();
    } catch (const ParameterError& ex) {
      throw ConfigError("/comb", ex.what());
    }
  }

  if (kind == ScenarioKind::kDetectLine || kind == ScenarioKind::kBayesRefine) {
    ObjectReader d(r.raw("detection"), "/detection");
    cfg.detection.tapers = static_cast<int>(d.integer("tapers", 2, 13));
    cfg.detection.ssqm_seed = d.unsigned64("ssqm_seed", 7);
    cfg.detection.covariance_term = d.boolean("covariance_term", true);
    {
      ObjectReader a(d.raw("aqm"), "/detection/aqm");
      cfg.detection.aqm.tolerance = a.positive("tolerance", 1e-6);
      cfg.detection.aqm.max_iterations = static_cast<int>(a.integer("max_iterations", 1, 50));
      const std::string init = a.text("initial", "equal");
      if (init != "equal" && init != "k0") throw ConfigError("/detection/aqm/initial", "expected \"equal\" or \"k0\"");
      cfg.detection.aqm.initial_from_k0 = init == "k0";
      cfg.detection.aqm.use_local_bias = a.boolean("local_bias", true);
      a.finish();
    }
    {
      ObjectReader s(d.raw("ssqm"), "/detection/ssqm");
      cfg.detection.ssqm.grid_points = static_cast<int>(s.integer("grid_points", 16, 512));
      cfg.detection.ssqm.random_starts = static_cast<int>(s.integer("random_starts", 0, 8));
      cfg.detection.ssqm.leakage_weight = s.non_negative("leakage_weight", 0.0);
      cfg.detection.ssqm.max_iterations = static_cast<int>(s.integer("max_iterations", 1, 4000));
      s.finish();
    }
    {
      ObjectReader s(d.raw("segments"), "/detection/segments");
      cfg.detection.segment_width = kTwoPi * s.positive("width_hz");
      cfg.detection.segments = static_cast<int>(s.integer("count", 1));
      s.finish();
    }
    d.finish();
    if (cfg.detection.tapers > cfg.waveform.n) throw ConfigError("/detection/tapers", "cannot exceed n");
    if (cfg.simulation.shots % cfg.detection.tapers != 0)
      throw ConfigError("/simulation/shots", "must be divisible by /detection/tapers for the multitaper split");
  }

  if (kind == ScenarioKind::kBayesRefine) {
    ObjectReader b(r.raw("refinement"), "/refinement");
    auto& ref = cfg.refinement;
    ref.waveform = waveform_from_json(b.raw("waveform"), "/refinement/waveform");
    ref.shifts = shifts_from_json(b.raw("shifts"), "/refinement/shifts");
    check_shifts(ref.shifts, ref.waveform, "/refinement/shifts");
    ref.shots = static_cast<int>(b.integer("shots", 1));
    ref.signal_model = b.parsed("signal_model", parse_signal_model);
    ref.credible_level = b.positive("credible_level", 0.95);
    if (!(ref.credible_level < 1.0)) throw ConfigError("/refinement/credible_level", "must lie in (0, 1)");
    {
      ObjectReader p(b.raw("prior"), "/refinement/prior");
      const std::string pk = p.text("kind", "fisher");
      if (pk != "fisher" && pk != "diffuse") throw ConfigError("/refinement/prior/kind", "expected \"fisher\" or \"diffuse\"");
      ref.diffuse_prior = pk == "diffuse";
      ref.diffuse_sigma = p.positive("sigma0_per_hz", 1.0);
      ref.condition_limit = p.positive("condition_limit", 1e10);
      if (!(ref.condition_limit > 1.0)) throw ConfigError("/refinement/prior/condition_limit", "must exceed 1");
      if (p.has("lambda") && p.raw("lambda").is_string()) {
        const std::string rule = p.text("lambda");
        if (rule == "mean-scale") ref.lambda_rule = LambdaRule::kMeanScale;
        else if (rule == "trace-scaled") ref.lambda_rule = LambdaRule::kTraceScaled;
        else throw ConfigError("/refinement/prior/lambda", "expected a number, \"mean-scale\" or \"trace-scaled\"");
      } else if (p.has("lambda")) {
        ref.lambda_rule = LambdaRule::kFixed;
        ref.lambda = p.non_negative("lambda", 0.0);
      } else {
        ref.lambda_rule = LambdaRule::kTraceScaled;
      }
      p.finish();
    }
    b.finish();
  }

  r.finish();
  return cfg;
}

ExperimentDocument parse_experiment_document(const json& document) {
  ObjectReader r(document, "");
  const json& version = r.raw("schema_version");
  if (!version.is_number_integer() || version.get<int>() != kScenarioSchemaVersion)
    throw ConfigError("/schema_version", "unsupported schema version (expected " +
                                             std::to_string(kScenarioSchemaVersion) + ")");
  ExperimentDocument out;
  out.document = document;
  out.psd = psd_from_json(r.raw("psd"), "/psd");
  out.waveform = waveform_from_json(r.raw("waveform"), "/waveform");
  out.shift = kTwoPi * r.non_negative("shift_hz", 0.0);
  if (!(out.shift < out.waveform.nyquist()))
    throw ConfigError("/shift_hz", "shift frequency must lie below the Nyquist frequency");
  out.order = static_cast<int>(r.integer("order", 0, 0));
  if (out.order >= out.waveform.n) throw ConfigError("/order", "order must be below n");
  out.simulation = simulation_from_json(r.raw("simulation"), "/simulation");
  if (r.has("integration")) out.integration = integration_from_json(r.raw("integration"), "/integration");
  out.seed = r.unsigned64("seed", 1);
  r.finish();
  return out;
}

}  // namespace slepqns
