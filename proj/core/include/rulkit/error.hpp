#pragma once

#include <stdexcept>
#include <string>

namespace rulkit {

/// Failure categories surfaced by the library. The CLI maps each category to
/// a distinct exit code and message prefix.
enum class ErrorCategory {
  config,
  parse,
  data,
  dimension,
  contract,
  numeric,
  state,
  io,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::data: return "data";
    case ErrorCategory::dimension: return "dimension";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::state: return "state";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(std::string(to_string(category)) + " error: " + message),
        category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::config, m) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(ErrorCategory::parse, m) {}
};
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorCategory::data, m) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error(ErrorCategory::dimension, m) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error(ErrorCategory::contract, m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorCategory::numeric, m) {}
};
struct StateError : Error {
  explicit StateError(const std::string& m) : Error(ErrorCategory::state, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCategory::io, m) {}
};

}  // namespace rulkit
