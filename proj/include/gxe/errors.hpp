#pragma once

#include <stdexcept>
#include <string>

namespace gxe {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: unreadable files, missing columns, invalid configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// The data or the current parameters make a sub-problem unsolvable.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class RankDeficientError : public NumericalError {
 public:
  RankDeficientError(const std::string& what, long column)
      : NumericalError(what), column_(column) {}
  /// Index of the first design column found to be linearly dependent.
  long column() const noexcept { return column_; }

 private:
  long column_;
};

class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A score block has no information: its multiplier r1 is identically zero.
class UnidentifiedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace gxe
