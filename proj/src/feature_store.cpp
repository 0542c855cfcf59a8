#include "embreg/feature_store.hpp"

#include "embreg/binary_io.hpp"
#include "embreg/resample.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace embreg {

FeatureStream::FeatureStream(Tensor matrix, double frame_period_s, std::string name)
    : matrix_(std::move(matrix)), period_(frame_period_s), name_(std::move(name)) {
  if (matrix_.rows() < 1 || matrix_.cols() < 1) {
    throw DimensionError("feature stream '" + name_ + "' must have at least one frame and one dim, got " +
                         shape_string(matrix_));
  }
  if (!(period_ > 0.0) || !std::isfinite(period_)) {
    throw ArgumentError("feature stream '" + name_ + "' needs a positive frame period");
  }
}

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::A:
      return "a";
    case FeatureKind::B:
      return "b";
    case FeatureKind::Combined:
      return "combined";
  }
  return "?";
}

FeatureKind parse_feature_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "a") return FeatureKind::A;
  if (lower == "b") return FeatureKind::B;
  if (lower == "combined") return FeatureKind::Combined;
  throw ArgumentError("unknown feature kind '" + std::string(text) + "'");
}

namespace {

/// Integer n with ratio ~= n, or AlignmentError.
Index integer_ratio(double ratio, const std::string& context) {
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > kPeriodTolerance * n) {
    std::ostringstream os;
    os << context << ": period ratio " << ratio << " is not an integer";
    throw AlignmentError(os.str());
  }
  return static_cast<Index>(n);
}

}  // namespace

FeatureStream combine(const FeatureStream& a, const FeatureStream& b) {
  const bool a_slower = a.frame_period_s() >= b.frame_period_s();
  const FeatureStream& slow = a_slower ? a : b;
  const FeatureStream& fast = a_slower ? b : a;
  const Index k = integer_ratio(slow.frame_period_s() / fast.frame_period_s(), "combine");

  Tensor slow_up = repeat_frames(slow.matrix(), k);
  const Index frames = std::min(slow_up.rows(), fast.frames());
  const Index excess = std::max(slow_up.rows(), fast.frames()) - frames;
  if (excess >= k) {
    throw AlignmentError("combine: '" + a.name() + "' and '" + b.name() + "' differ by " + std::to_string(excess) +
                         " frames after upsampling by " + std::to_string(k));
  }

  const Tensor& a_mat = a_slower ? slow_up : fast.matrix();
  const Tensor& b_mat = a_slower ? fast.matrix() : slow_up;
  Tensor out(frames, a.dims() + b.dims());
  out.leftCols(a.dims()) = a_mat.topRows(frames);
  out.rightCols(b.dims()) = b_mat.topRows(frames);
  return FeatureStream(std::move(out), fast.frame_period_s(), a.name() + "+" + b.name());
}

Tensor align_to(const FeatureStream& v, Index frames, double period_s) {
  if (frames < 1) throw ArgumentError("align_to: target frame count must be positive");
  if (!(period_s > 0.0)) throw ArgumentError("align_to: target period must be positive");

  const double ratio = v.frame_period_s() / period_s;
  if (ratio >= 1.0) {
    const Index n = integer_ratio(ratio, "align_to '" + v.name() + "'");
    if (n == 1) return fit_frames(v.matrix(), frames);
    return fit_frames(repeat_frames(v.matrix(), n), frames);
  }
  const Index n = integer_ratio(1.0 / ratio, "align_to '" + v.name() + "'");
  // Drop a ragged tail before pooling; a stream shorter than one window pools as a whole.
  const Index usable = v.frames() >= n ? v.frames() - v.frames() % n : v.frames();
  const Index window = v.frames() >= n ? n : v.frames();
  return fit_frames(pool_frames(v.matrix().topRows(usable), window), frames);
}

FeatureStream quantize8(const FeatureStream& v) {
  Tensor out = v.matrix();
  for (Index c = 0; c < out.cols(); ++c) {
    const double lo = out.col(c).minCoeff();
    const double hi = out.col(c).maxCoeff();
    if (!(hi > lo)) continue;
    const double step = (hi - lo) / 255.0;
    for (Index r = 0; r < out.rows(); ++r) {
      const double q = std::clamp(std::round((out(r, c) - lo) / step), 0.0, 255.0);
      // endpoints map back exactly so a second pass sees the same [lo, hi]
      out(r, c) = q == 255.0 ? hi : lo + q * step;
    }
  }
  return FeatureStream(std::move(out), v.frame_period_s(), v.name());
}

std::vector<std::uint8_t> encode_stream(const FeatureStream& stream) {
  io::ByteWriter w;
  w.put_bytes("FSTR");
  w.put<std::uint32_t>(kStreamFormatVersion);
  w.put_string(stream.name());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(stream.frames()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(stream.dims()));
  w.put<double>(stream.frame_period_s());
  w.put_f32(stream.matrix());
  return std::move(w.bytes());
}

FeatureStream decode_stream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FSTR", 4) != 0) throw FormatError("bad magic", 0);
  io::ByteReader r(bytes);
  r.skip(4);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kStreamFormatVersion) {
    throw FormatError("version mismatch (found " + std::to_string(version) + ", expected " +
                          std::to_string(kStreamFormatVersion) + ")",
                      4);
  }
  std::string name = r.get_string("name");
  const auto frames = r.get<std::uint32_t>("frame count");
  const auto dims = r.get<std::uint32_t>("dim count");
  const std::size_t header_end = r.offset();
  const double period = r.get<double>("frame period");
  if (frames == 0 || dims == 0) throw FormatError("empty matrix", header_end - 8);
  if (!(period > 0.0) || !std::isfinite(period)) throw FormatError("non-positive frame period", header_end);
  Tensor m = r.get_f32(frames, dims, "payload");
  if (r.remaining() != 0) throw FormatError("trailing bytes after payload", r.offset());
  return FeatureStream(std::move(m), period, std::move(name));
}

void write_stream(const FeatureStream& stream, const std::filesystem::path& path) {
  io::write_file(path, encode_stream(stream));
}

FeatureStream read_stream(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode_stream(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail, e.offset);
  }
}

}  // namespace embreg
