#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace slepqns {

// Raised when a caller passes arguments outside an operation's domain.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a numerical routine fails to reach its accuracy target.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid scenario configuration; path is a JSON pointer such as /waveform/dt_s.
class ConfigError : public ParameterError {
 public:
  ConfigError(std::string path, const std::string& message)
      : ParameterError((path.empty() ? std::string("/") : path) + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace slepqns
