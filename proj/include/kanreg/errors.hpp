#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kanreg {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced inside a network layer.
class NumericError : public Error {
 public:
  NumericError(std::size_t layer, const std::string& what)
      : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// Malformed text or binary input. `offset` is a byte offset for JSON and
/// binary files, and a 1-based line number for CSV (see `is_line`).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset, bool is_line = false)
      : Error(what), offset_(offset), is_line_(is_line) {}
  std::size_t offset() const noexcept { return offset_; }
  bool is_line() const noexcept { return is_line_; }

 private:
  std::size_t offset_;
  bool is_line_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVersionError : public Error {
 public:
  using Error::Error;
};

class DivergedError : public Error {
 public:
  DivergedError(std::size_t epoch, double lr, const std::string& what)
      : Error(what), epoch_(epoch), lr_(lr) {}
  std::size_t epoch() const noexcept { return epoch_; }
  double lr() const noexcept { return lr_; }

 private:
  std::size_t epoch_;
  double lr_;
};

}  // namespace kanreg
