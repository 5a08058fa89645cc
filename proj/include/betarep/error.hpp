#pragma once

#include <stdexcept>
#include <string>

namespace betarep {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A box has non-positive extent, or a visible box does not intersect its full box.
class InvalidGeometry : public Error {
 public:
  using Error::Error;
};

/// Moments that no beta distribution can reproduce (nu <= 0).
class InfeasibleMoments : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A discretization region does not cover the distribution it samples.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Grids or masks with mismatched layout.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Regression targets that cannot be encoded or decoded.
class InvalidTarget : public Error {
 public:
  using Error::Error;
};

/// A metric that is undefined for the given data (e.g. no ground truth).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Malformed input record. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Synthetic scene configuration that cannot be realized.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Invalid toolkit configuration (bad value or unknown key).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace betarep
