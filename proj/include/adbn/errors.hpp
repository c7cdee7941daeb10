#pragma once

#include <stdexcept>
#include <string>

namespace adbn {

// Tensor dimension mismatch; the message names the offending axis.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when an instance exceeds the 2^(I+J) exact-enumeration guard.
class EnumerationLimitError : public std::domain_error {
 public:
  explicit EnumerationLimitError(const std::string& what) : std::domain_error(what) {}
};

// Non-finite value detected; the message names the parameter block.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable, empty, or inconsistent input data.
class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration; carries the offending field name.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error("config field \"" + field + "\": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Checkpoint/cache version or preprocessing-descriptor mismatch.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace adbn
