#pragma once

#include <stdexcept>
#include <string>

namespace ubert {

// Base for every error raised by the library. Callers that only need to
// report failures can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input values: empty text, duplicate categories, unknown token ids.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Character span that does not line up with token boundaries, or an
// annotation that does not fit the tokenization of its text.
class AlignmentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Event roles without a matching argument instance.
class CoverageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Tensor operands with incompatible shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. backward() on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Carries the 1-based line number when known.
class FormatError : public ValidationError {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : ValidationError(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Training produced a NaN or infinite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ubert
