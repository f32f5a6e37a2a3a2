#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uctc {

/// Index outside the tensor's extent box.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Invalid argument (k out of range, wrong order, known index where a
/// missing one is required, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-positive or non-finite value, or an empty tensor where one is not
/// allowed.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A configured size cap was exceeded.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Two entries share the same index.
class DuplicateError : public std::invalid_argument {
 public:
  DuplicateError(const std::string& what, std::size_t line = 0)
      : std::invalid_argument(what), line_(line) {}
  /// 1-based input line of the second occurrence, 0 when not from a file.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Malformed input text or a rejected record. Carries the 1-based line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A record parsed fine but its transformed value is not strictly positive.
class RecordError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// External id not present in an id map.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A declared ordering does not hold on the input data.
class SpecificationError : public std::invalid_argument {
 public:
  enum class Clause { kSupportMismatch, kNotStrict, kMalformed };
  SpecificationError(const std::string& what, Clause clause)
      : std::invalid_argument(what), clause_(clause) {}
  Clause clause() const noexcept { return clause_; }

 private:
  Clause clause_;
};

}  // namespace uctc
