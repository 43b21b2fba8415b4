#pragma once

#include <stdexcept>
#include <string>

namespace pivotmt {

/// Base class for every error raised by the toolkit. `kind()` is a stable,
/// machine-parsable class name used by the command-line front end.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error("input", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

class LearnError : public Error {
 public:
  explicit LearnError(const std::string& message) : Error("learn", message) {}
};

class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& message) : Error("decode", message) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message) : Error("training", message) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

/// Raised by the cascade when one of its stages fails; carries the stage name
/// ("stage1" or "stage2") and the class of the underlying error.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error("stage:" + cause.kind(), stage + ": " + cause.what()),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace pivotmt
