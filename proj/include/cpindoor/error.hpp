#pragma once

#include <stdexcept>
#include <string>

namespace cpindoor {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text does not follow the expected schema (missing column, bad header).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A cell could not be read, or a row has the wrong number of cells.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// Operation applied to an object in the wrong state (e.g. normalizing twice).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (split fractions, k, grids, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a precondition of a function.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A prediction source does not cover every record it is asked about.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Values failed a semantic check (probabilities, loss monotonicity).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractError(message);
}

}  // namespace detail
}  // namespace cpindoor
