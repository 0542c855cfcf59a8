#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace embreg {

/// Row-major dense matrix. Rows are time frames, columns are feature bins.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Tensor = Matrix<double>;
using Index = Eigen::Index;

std::string shape_string(const Tensor& t);

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
struct DimensionError : Error {
  using Error::Error;
};

/// A scalar argument is outside its domain.
struct ArgumentError : Error {
  using Error::Error;
};

/// Feature streams cannot be brought onto a common time grid.
struct AlignmentError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

/// Caller broke an operation's precondition (e.g. a batch too small).
struct ContractError : Error {
  using Error::Error;
};

/// Binary file could not be decoded. `offset` is the byte position of the fault.
struct FormatError : Error {
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), detail(what), offset(offset) {}
  std::string detail;
  std::size_t offset;
};

/// A corpus on disk is incomplete or unreadable.
struct LoadError : Error {
  using Error::Error;
};

/// Training produced a NaN or Inf.
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace embreg
