#pragma once

#include "embreg/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace embreg {

/// A pre-trained representation sampled on a regular time grid: one row per
/// frame, `frame_period_s` seconds apart.
class FeatureStream {
 public:
  FeatureStream(Tensor matrix, double frame_period_s, std::string name = {});

  const Tensor& matrix() const { return matrix_; }
  double frame_period_s() const { return period_; }
  const std::string& name() const { return name_; }
  Index frames() const { return matrix_.rows(); }
  Index dims() const { return matrix_.cols(); }
  double duration_s() const { return period_ * static_cast<double>(frames()); }

  friend bool operator==(const FeatureStream& a, const FeatureStream& b) {
    return a.period_ == b.period_ && a.name_ == b.name_ && a.matrix_.rows() == b.matrix_.rows() &&
           a.matrix_.cols() == b.matrix_.cols() && a.matrix_ == b.matrix_;
  }

 private:
  Tensor matrix_;
  double period_;
  std::string name_;
};

/// A: VGGish-like, B: OpenL3-like, Combined: A columns followed by B columns.
enum class FeatureKind { A, B, Combined };

struct FeatureLayout {
  Index dims;
  double frame_period_s;
};

constexpr FeatureLayout layout(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::A:
      return {128, 1.0};
    case FeatureKind::B:
      return {512, 0.1};
    case FeatureKind::Combined:
      return {640, 0.1};
  }
  return {0, 0.0};
}

std::string_view to_string(FeatureKind kind);
/// Accepts "a", "b", "combined" (case-insensitive).
FeatureKind parse_feature_kind(std::string_view text);

/// Relative tolerance on period ratios before streams count as misaligned.
inline constexpr double kPeriodTolerance = 0.05;

/// Column-wise concatenation after repeating the slower stream onto the faster
/// grid. Over-long streams are trimmed when they overshoot by fewer than k
/// frames, k being the period ratio.
FeatureStream combine(const FeatureStream& a, const FeatureStream& b);

/// Resample to exactly `frames` rows at `period_s`: repeat each frame n times
/// when the stream is coarser, average-pool by n when it is finer, then trim or
/// repeat the last frame.
Tensor align_to(const FeatureStream& v, Index frames, double period_s);

/// Per-dimension 8-bit quantization round trip over [min, max].
FeatureStream quantize8(const FeatureStream& v);

// FSTR container ------------------------------------------------------------

inline constexpr std::uint32_t kStreamFormatVersion = 1;

std::vector<std::uint8_t> encode_stream(const FeatureStream& stream);
FeatureStream decode_stream(std::span<const std::uint8_t> bytes);

void write_stream(const FeatureStream& stream, const std::filesystem::path& path);
FeatureStream read_stream(const std::filesystem::path& path);

}  // namespace embreg
