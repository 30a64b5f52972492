#pragma once

#include <stdexcept>
#include <string>

namespace facestyle {

// Process exit codes used by the command-line tool.
enum class ExitCode : int { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ExitCode::kConfig, "config error: " + what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(ExitCode::kData, "data error: " + what) {}
};

// Tensor or array shapes that do not agree.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ExitCode::kData, "shape error: " + what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what)
      : Error(ExitCode::kData, "index error: " + what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ExitCode::kNumeric, "numeric error: " + what) {}
};

// A per-item failure in a batch pipeline; the caller may skip and continue.
class RetriableError : public Error {
 public:
  RetriableError(std::string item_id, const std::string& what)
      : Error(ExitCode::kData, "retriable error [" + item_id + "]: " + what),
        item_id_(std::move(item_id)) {}
  const std::string& item_id() const noexcept { return item_id_; }

 private:
  std::string item_id_;
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what)
      : Error(ExitCode::kNumeric, "invariant violated: " + what) {}
};

}  // namespace facestyle
