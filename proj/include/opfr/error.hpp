#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opfr {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or violated precondition (sizes, counts, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Two points that must differ coincide.
class DegeneratePair : public Error {
 public:
  using Error::Error;
};

/// Frame axes collapse (parallel or antiparallel inputs).
class DegenerateFrame : public Error {
 public:
  using Error::Error;
};

class InsufficientNeighbors : public Error {
 public:
  using Error::Error;
};

/// PCA neighborhood is rank deficient (collinear or coincident points).
class NormalUndefined : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace opfr
