#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace grasspca {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// Factorization found a (numerically) rank-deficient column; carries the
// offending column index so callers can reinitialize it.
struct RankDeficient : Error {
  RankDeficient(std::size_t column, const std::string& what)
      : Error(what), column(column) {}
  std::size_t column;
};

struct NoConvergence : Error {
  NoConvergence(std::size_t iterations, double residual, const std::string& what)
      : Error(what), iterations(iterations), residual(residual) {}
  std::size_t iterations;
  double residual;
};

struct NotOrthonormal : Error {
  using Error::Error;
};

struct Divergence : Error {
  using Error::Error;
};

struct EmptySample : Error {
  using Error::Error;
};

struct TooFewSamples : Error {
  using Error::Error;
};

struct SingleClass : Error {
  using Error::Error;
};

struct MissingFile : Error {
  using Error::Error;
};

struct HeaderMismatch : Error {
  using Error::Error;
};

struct EmptyAfterFiltering : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what) : Error(what), line(line) {}
  std::size_t line;
};

// Aggregates every offending config field so a bad config is reported once.
struct ValidationError : Error {
  ValidationError(std::vector<std::string> fields, const std::string& what)
      : Error(what), fields(std::move(fields)) {}
  std::vector<std::string> fields;
};

struct InvalidArgument : Error {
  using Error::Error;
};

}  // namespace grasspca
