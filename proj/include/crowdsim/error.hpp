#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crowdsim {

/// Malformed or inconsistent input data (files, rows, off-scale values).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
  DataError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  /// 1-based line number of the offending row, 0 when not line-oriented.
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_ = 0;
};

/// Invalid configuration or argument combination.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// LLM backend transport failure (after retries).
class BackendError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The backend answered, but no on-scale decision could be extracted.
class UnparseableResponse : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

}  // namespace crowdsim
