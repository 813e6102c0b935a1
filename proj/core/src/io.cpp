#include "slepqns/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "slepqns/errors.hpp"

namespace slepqns {

BundleWriter::BundleWriter(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

void BundleWriter::write(const std::string& relative, const std::string& content) {
  const std::filesystem::path path = root_ / relative;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
  }
  for (auto& [name, size] : files_) {
    if (name == relative) {
      size = content.size();
      return;
    }
  }
  files_.emplace_back(relative, content.size());
}

void BundleWriter::write_json(const std::string& relative, const nlohmann::json& j) { write(relative, j.dump(2) + "\n"); }

nlohmann::json BundleWriter::listing() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [name, size] : files_) out.push_back({{"path", name}, {"bytes", size}});
  return out;
}

void write_columns_csv(std::ostream& out, std::span<const std::string> header,
                       const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw ParameterError("one header entry per column is required");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) throw ParameterError("CSV columns must have equal length");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  char cell[32];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::snprintf(cell, sizeof cell, "%.12e", columns[c][r]);
      out << (c ? "," : "") << cell;
    }
    out << '\n';
  }
}

void write_tapers_csv(std::span<const Taper> tapers, std::ostream& out) {
  if (tapers.empty()) throw ParameterError("no tapers to write");
  const int n = tapers.front().length();
  out << 'n';
  for (const Taper& t : tapers) {
    if (t.length() != n) throw ParameterError("tapers must share a length");
    out << ",v" << t.order;
  }
  out << '\n';
  char cell[32];
  for (int i = 0; i < n; ++i) {
    out << i;
    for (const Taper& t : tapers) {
      std::snprintf(cell, sizeof cell, ",%.17g", t.values[i]);
      out << cell;
    }
    out << '\n';
  }
}

nlohmann::json to_json(const ExperimentResult& r) {
  nlohmann::json counts = nlohmann::json::array();
  for (const AxisCounts& c : r.counts) counts.push_back({{"axis", to_string(c.axis)}, {"shots", c.shots}, {"up", c.up}});
  return {{"label", r.label},
          {"counts", counts},
          {"signal_model", to_string(r.signal_model)},
          {"signal", r.signal},
          {"sigma2", r.sigma2},
          {"variance", r.variance()},
          {"shots", r.shots},
          {"seed", r.seed},
          {"saturated", r.saturated},
          {"aliasing_warning", r.aliasing_warning}};
}

ExperimentResult experiment_result_from_json(const nlohmann::json& j) {
  try {
    std::vector<AxisCounts> counts;
    for (const auto& c : j.at("counts")) {
      counts.push_back({parse_axis(c.at("axis").get<std::string>()), c.at("shots").get<int>(), c.at("up").get<int>()});
    }
    // Signal and variance are recomputed from the counts.
    ExperimentResult r = summarize_counts(std::move(counts), parse_signal_model(j.at("signal_model").get<std::string>()));
    r.label = j.value("label", std::string{});
    r.seed = j.value("seed", std::uint64_t{0});
    r.aliasing_warning = j.value("aliasing_warning", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed experiment record: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace slepqns
