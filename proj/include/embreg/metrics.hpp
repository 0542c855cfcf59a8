#pragma once

#include "embreg/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace embreg {

/// PR-AUC is undefined for a tag without positives.
struct UndefinedMetricError : Error {
  using Error::Error;
};

/// Area under the precision-recall step curve. Scores are swept in
/// descending order; tied scores enter the curve together as one point.
template <typename DS, typename DL>
double pr_auc(const Eigen::DenseBase<DS>& scores, const Eigen::DenseBase<DL>& labels) {
  const Index n = scores.size();
  if (labels.size() != n) throw DimensionError("pr_auc: scores and labels differ in length");
  double positives = 0.0;
  for (Index i = 0; i < n; ++i) positives += labels(i) != 0 ? 1.0 : 0.0;
  if (positives == 0.0) throw UndefinedMetricError("pr_auc: no positive labels");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });

  double tp = 0.0, fp = 0.0, prev_recall = 0.0, area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores(order[i]);
    for (; i < order.size() && scores(order[i]) == s; ++i) {
      (labels(order[i]) != 0 ? tp : fp) += 1.0;
    }
    const double recall = tp / positives;
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return area;
}

/// Mean of per-tag PR-AUC over the columns that have at least one positive.
template <typename DS, typename DL>
double macro_pr_auc(const Eigen::MatrixBase<DS>& scores, const Eigen::MatrixBase<DL>& labels) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
    throw DimensionError("macro_pr_auc: score and label matrices differ in shape");
  }
  double total = 0.0;
  Index used = 0;
  for (Index c = 0; c < scores.cols(); ++c) {
    if ((labels.col(c).array() != 0).count() == 0) continue;
    total += pr_auc(scores.col(c), labels.col(c));
    ++used;
  }
  if (used == 0) throw UndefinedMetricError("macro_pr_auc: no tag has a positive label");
  return total / static_cast<double>(used);
}

inline constexpr double kDefaultF1Threshold = 0.1;

/// Mean over instances of the F1 between thresholded scores (score >= threshold)
/// and labels. An instance with neither predictions nor labels scores 1.
template <typename DS, typename DL>
double instance_f1(const Eigen::MatrixBase<DS>& scores, const Eigen::MatrixBase<DL>& labels,
                   double threshold = kDefaultF1Threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("instance_f1: threshold must lie in (0, 1)");
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
    throw DimensionError("instance_f1: score and label matrices differ in shape");
  }
  if (scores.rows() == 0) throw DimensionError("instance_f1: no instances");
  double total = 0.0;
  for (Index r = 0; r < scores.rows(); ++r) {
    Index tp = 0, fp = 0, fn = 0;
    for (Index c = 0; c < scores.cols(); ++c) {
      const bool predicted = scores(r, c) >= threshold;
      const bool actual = labels(r, c) != 0;
      tp += predicted && actual;
      fp += predicted && !actual;
      fn += !predicted && actual;
    }
    total += (tp + fp + fn == 0) ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return total / static_cast<double>(scores.rows());
}

}  // namespace embreg
