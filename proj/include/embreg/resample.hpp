#pragma once

#include "embreg/tensor.hpp"

namespace embreg {

/// Each frame duplicated `factor` times consecutively.
template <typename Derived>
Matrix<typename Derived::Scalar> repeat_frames(const Eigen::MatrixBase<Derived>& x, Index factor) {
  if (factor < 1) throw ArgumentError("repeat_frames: factor must be at least 1");
  Matrix<typename Derived::Scalar> out(x.rows() * factor, x.cols());
  for (Index r = 0; r < x.rows(); ++r) out.middleRows(r * factor, factor).rowwise() = x.row(r);
  return out;
}

/// Mean of each run of `factor` consecutive frames, computed as
/// first + sum(x_i - first) / factor so that a run of identical frames
/// reproduces the frame exactly.
template <typename Derived>
Matrix<typename Derived::Scalar> pool_frames(const Eigen::MatrixBase<Derived>& x, Index factor) {
  using Scalar = typename Derived::Scalar;
  if (factor < 1) throw ArgumentError("pool_frames: factor must be at least 1");
  if (x.rows() % factor != 0) {
    throw DimensionError("pool_frames: " + std::to_string(x.rows()) + " frames not divisible by " +
                         std::to_string(factor));
  }
  const Index out_rows = x.rows() / factor;
  Matrix<Scalar> out(out_rows, x.cols());
  for (Index r = 0; r < out_rows; ++r) {
    const auto first = x.row(r * factor);
    RowVector<Scalar> acc = RowVector<Scalar>::Zero(x.cols());
    for (Index k = 1; k < factor; ++k) acc += x.row(r * factor + k) - first;
    out.row(r) = first + acc / static_cast<Scalar>(factor);
  }
  return out;
}

/// Exactly `rows` frames: trailing frames dropped, or the last frame repeated.
template <typename Derived>
Matrix<typename Derived::Scalar> fit_frames(const Eigen::MatrixBase<Derived>& x, Index rows) {
  if (rows < 1) throw ArgumentError("fit_frames: target frame count must be positive");
  if (x.rows() < 1) throw DimensionError("fit_frames: source has no frames");
  Matrix<typename Derived::Scalar> out(rows, x.cols());
  const Index keep = std::min(rows, x.rows());
  out.topRows(keep) = x.topRows(keep);
  for (Index r = keep; r < rows; ++r) out.row(r) = x.row(x.rows() - 1);
  return out;
}

}  // namespace embreg
