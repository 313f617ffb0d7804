#pragma once

#include <stdexcept>
#include <string>

namespace polyprobe {

// Base of every error the library throws. The CLI maps subclasses onto exit
// codes, so keep new errors under one of the families below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Values are out of their domain: non-finite floats, labels outside {0,1},
// duplicate ids.
class DataError : public Error {
 public:
  using Error::Error;
};

// Archive bytes do not follow the HSAF layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Inputs for which the requested quantity is not defined: single-class
// training data, empty resource groups, zero-norm or constant vectors.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

// Line-oriented input that failed to parse. line() is 1-based, 0 if unknown.
// A set of probes lacks an entry an analysis needs.
class IncompleteSetError : public LookupError {
 public:
  using LookupError::LookupError;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class LanguageError : public Error {
 public:
  using Error::Error;
};

// Bad or inconsistent experiment configuration; always raised before any
// probe is trained.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

}  // namespace polyprobe
