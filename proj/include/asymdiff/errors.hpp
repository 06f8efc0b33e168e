#pragma once

#include <stdexcept>
#include <string>

namespace asymdiff {

// Process exit codes shared by every CLI subcommand.
enum class ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Base of all engine errors; carries the exit code the CLI maps it to.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Shape mismatches, invalid configs, bad flags.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::kUsage, what) {}
};

// Malformed input rows, out-of-vocabulary tokens, schema hash mismatches.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

// Non-finite losses or gradients.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ExitCode::kNumeric, what) {}
};

// A metric asked of input where it is not defined (e.g. AUC of a single class).
class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& what) : Error(ExitCode::kData, what) {}
};

}  // namespace asymdiff
