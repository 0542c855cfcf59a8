#pragma once

#include "embreg/feature_store.hpp"

#include <string>
#include <vector>

namespace embreg {

/// One clip: spectrogram-like input, multi-hot labels, and the two
/// pre-trained feature streams at their native rates.
struct Example {
  std::string id;
  Tensor input;   // T_in x input_bins
  Tensor labels;  // 1 x C, entries 0 or 1
  FeatureStream a;
  FeatureStream b;
};

enum class Split { Train, Val, Test };

struct Dataset {
  double input_period_s = 0.1;
  Index input_bins = 0;
  Index num_classes = 0;
  std::vector<Example> train;
  std::vector<Example> val;
  std::vector<Example> test;

  std::size_t size() const { return train.size() + val.size() + test.size(); }
  friend bool operator==(const Dataset&, const Dataset&);
};

bool operator==(const Example& x, const Example& y);

/// The stream a method consumes for `kind`; Combined is built on demand.
FeatureStream features_for(const Example& e, FeatureKind kind);

/// features_for(e, kind) resampled onto `frames` rows at `period_s`.
Tensor aligned_features(const Example& e, FeatureKind kind, Index frames, double period_s);

}  // namespace embreg
