#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace deoc {

/// Exit-code buckets used by the CLI: 2 config, 3 data, 4 training abort,
/// 5 stage-order violation.
enum class ErrorCategory : int {
  config = 2,
  data = 3,
  training = 4,
  stage_order = 5,
};

/// Base error. `kind()` is a stable machine-parseable token, one per failure
/// class ("shape", "geometry", "corrupt-file", ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(message), category_(category), kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::config, "config", m) {}
};

struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorCategory::data, "data", m) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error(ErrorCategory::data, "shape", m) {}
};

struct SizeError : Error {
  explicit SizeError(const std::string& m) : Error(ErrorCategory::data, "size", m) {}
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& m) : Error(ErrorCategory::data, "geometry", m) {}
};

struct DecodeError : Error {
  explicit DecodeError(const std::string& m) : Error(ErrorCategory::data, "decode", m) {}
};

struct EmptyInputError : Error {
  explicit EmptyInputError(const std::string& m) : Error(ErrorCategory::data, "empty-input", m) {}
};

struct DetectionError : Error {
  explicit DetectionError(const std::string& m) : Error(ErrorCategory::data, "detection", m) {}
};

struct AmbiguityError : Error {
  explicit AmbiguityError(const std::string& m) : Error(ErrorCategory::data, "ambiguity", m) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorCategory::data, "numeric", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCategory::data, "io", m) {}
};

struct CorruptFileError : Error {
  explicit CorruptFileError(const std::string& m) : Error(ErrorCategory::data, "corrupt-file", m) {}
};

struct VersionError : Error {
  explicit VersionError(const std::string& m) : Error(ErrorCategory::data, "version", m) {}
};

struct StageOrderError : Error {
  explicit StageOrderError(const std::string& m)
      : Error(ErrorCategory::stage_order, "stage-order", m) {}
};

/// Raised when training hits a non-finite loss. Carries the path of the last
/// checkpoint that was written before the abort ("" if none).
class TrainAbortError : public Error {
 public:
  TrainAbortError(const std::string& m, std::string last_checkpoint)
      : Error(ErrorCategory::training, "train-abort", m),
        last_checkpoint_(std::move(last_checkpoint)) {}

  const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }

 private:
  std::string last_checkpoint_;
};

}  // namespace deoc
