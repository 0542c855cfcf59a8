#pragma once

#include "embreg/dataset.hpp"

#include <cstdint>
#include <filesystem>

namespace embreg {

/// Parameters of the synthetic tagging corpus. Class information is planted as
/// directions (prototypes) in the input and in both feature streams. The input
/// additionally carries label-independent interference sources that the
/// feature streams do not see.
struct SynthSpec {
  Index num_examples = 1000;
  Index num_classes = 8;
  double clip_seconds = 2.0;
  double input_period_s = 0.1;
  Index input_bins = 16;
  double noise_x = 1.0;         // sigma of per-frame input noise
  double noise_v = 0.25;        // sigma of per-frame feature noise
  double label_density = 0.25;  // Bernoulli rate per class
  double rho = 0.25;            // share of feature dims carrying class signal
  double interference = 2.0;    // amplitude of label-independent input sources
  std::uint64_t seed = 1;

  void validate() const;
  Index input_frames() const;
  Index frames_at(double period_s) const;
};

/// Pure function of the spec; split 8:1:1 into train/val/test. All values are
/// representable in f32 so the corpus survives export bit-exactly.
Dataset generate(const SynthSpec& spec);

/// Writes FSTR files per example plus manifest.jsonl into `dir`; returns the manifest path.
std::filesystem::path export_corpus(const Dataset& data, const std::filesystem::path& dir);

/// Reads a corpus written by export_corpus. Accepts the directory or the manifest path.
Dataset load_corpus(const std::filesystem::path& where);

}  // namespace embreg
