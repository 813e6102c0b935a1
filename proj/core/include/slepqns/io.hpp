#pragma once

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "slepqns/qubit_sim.hpp"
#include "slepqns/slepian.hpp"

namespace slepqns {

// Collects the files of an output bundle; writes happen on the calling
// thread and each file is flushed and closed before the call returns.
class BundleWriter {
 public:
  explicit BundleWriter(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  void write(const std::string& relative, const std::string& content);
  void write_json(const std::string& relative, const nlohmann::json& j);
  // Relative paths and byte counts of everything written so far.
  nlohmann::json listing() const;

 private:
  std::filesystem::path root_;
  std::vector<std::pair<std::string, std::uintmax_t>> files_;
};

// Header row then one line per index; all columns must have equal length.
void write_columns_csv(std::ostream& out, std::span<const std::string> header,
                       const std::vector<std::vector<double>>& columns);

// Columns n, v0, v1, ... for tapers of equal length.
void write_tapers_csv(std::span<const Taper> tapers, std::ostream& out);

nlohmann::json to_json(const ExperimentResult& r);
ExperimentResult experiment_result_from_json(const nlohmann::json& j);

std::string read_text_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace slepqns
