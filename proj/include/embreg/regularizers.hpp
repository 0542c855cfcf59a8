#pragma once

#include "embreg/autodiff.hpp"
#include "embreg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace embreg {

/// Frame-mean cosine distance on plain matrices; same arithmetic as the
/// differentiable cosine_distance_frames.
template <typename DA, typename DB>
double frame_cosine_distance(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0) {
    throw DimensionError("frame_cosine_distance: shapes differ or are empty");
  }
  double total = 0.0;
  for (Index t = 0; t < a.rows(); ++t) {
    const double denom = std::max(a.row(t).norm() * b.row(t).norm(), kCosineEps);
    total += std::clamp(1.0 - a.row(t).dot(b.row(t)) / denom, 0.0, 2.0);
  }
  return total / static_cast<double>(a.rows());
}

/// Per-frame linear map (a kernel-size-1 convolution over time):
/// out_t = v_t * weight + bias.
struct ProjectionHead {
  Tensor weight;  // in_dims x out_dims
  Tensor bias;    // 1 x out_dims

  /// Weights uniform in +-sqrt(6 / (in + out)), bias zero.
  static ProjectionHead init(Index in_dims, Index out_dims, Rng rng);
  Index in_dims() const { return weight.rows(); }
  Index out_dims() const { return weight.cols(); }
  Index parameter_count() const { return weight.size() + bias.size(); }
};

/// A ProjectionHead bound into a graph.
struct LinearVars {
  Var weight;
  Var bias;
};

LinearVars bind(Graph& g, const ProjectionHead& head, bool trainable);
Var apply(const LinearVars& map, Var x);

/// d_cos(l, f(v)) with f the projection head. `v_aligned` must already share
/// the embedding's time grid.
Var con_reg_loss(Var l, Var v_aligned, const LinearVars& head);

/// Mean over unordered pairs i < j of |d_cos(l_i, l_j) - d_cos(v_i, v_j)|.
/// Pair terms are summed in ascending order of value, which makes the result
/// bit-identical under any permutation of the batch.
Var dis_reg_loss(std::span<const Var> batch_l, std::span<const Tensor> batch_v);

/// L + alpha * L_reg, or L unchanged when there is no regularizer.
Var compose_loss(Var task_loss, std::optional<Var> reg_loss, double alpha);

}  // namespace embreg
