#include "embreg/dataset.hpp"

namespace embreg {

bool operator==(const Example& x, const Example& y) {
  return x.id == y.id && x.input.rows() == y.input.rows() && x.input.cols() == y.input.cols() &&
         x.input == y.input && x.labels.cols() == y.labels.cols() && x.labels == y.labels && x.a == y.a &&
         x.b == y.b;
}

bool operator==(const Dataset& x, const Dataset& y) {
  return x.input_period_s == y.input_period_s && x.input_bins == y.input_bins && x.num_classes == y.num_classes &&
         x.train == y.train && x.val == y.val && x.test == y.test;
}

FeatureStream features_for(const Example& e, FeatureKind kind) {
  switch (kind) {
    case FeatureKind::A:
      return e.a;
    case FeatureKind::B:
      return e.b;
    case FeatureKind::Combined:
      return combine(e.a, e.b);
  }
  throw ArgumentError("features_for: unknown kind");
}

Tensor aligned_features(const Example& e, FeatureKind kind, Index frames, double period_s) {
  switch (kind) {
    case FeatureKind::A:
      return align_to(e.a, frames, period_s);
    case FeatureKind::B:
      return align_to(e.b, frames, period_s);
    case FeatureKind::Combined:
      return align_to(combine(e.a, e.b), frames, period_s);
  }
  throw ArgumentError("aligned_features: unknown kind");
}

}  // namespace embreg
