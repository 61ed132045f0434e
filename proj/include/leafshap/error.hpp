#pragma once

#include <stdexcept>
#include <string>

namespace leafshap {

// Every failure surfaced by the library derives from Error. The category
// decides the CLI exit code.
enum class ErrorCategory {
  kConfig = 2,      // bad flags, unsupported option combination
  kValidation = 3,  // malformed model / dataset / partition
  kDegenerate = 4,  // estimator cannot be evaluated for this query
  kOracle = 5,      // requested oracle is not available
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorCategory::kValidation, what) {}
};

// Schema violations in a model dump or dataset. `path` names the offending
// location, e.g. "trees[0].nodes[3].threshold".
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& path, const std::string& what)
      : ValidationError(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class DegenerateQueryError : public Error {
 public:
  explicit DegenerateQueryError(const std::string& what)
      : Error(ErrorCategory::kDegenerate, what) {}
};

class OracleError : public Error {
 public:
  explicit OracleError(const std::string& what)
      : Error(ErrorCategory::kOracle, what) {}
};

}  // namespace leafshap
