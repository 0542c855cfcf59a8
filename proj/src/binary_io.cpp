#include "embreg/binary_io.hpp"

#include <fstream>
#include <limits>

namespace embreg::io {

void ByteWriter::put_string(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) throw ArgumentError("string too long for u16 length");
  put(static_cast<std::uint16_t>(s.size()));
  put_bytes(s);
}

void ByteWriter::put_f32(const Tensor& t) {
  const std::size_t start = bytes_.size();
  bytes_.resize(start + sizeof(float) * static_cast<std::size_t>(t.size()));
  auto* out = bytes_.data() + start;
  for (Index i = 0; i < t.size(); ++i) {
    const float f = static_cast<float>(t.data()[i]);
    std::memcpy(out + i * sizeof(float), &f, sizeof(float));
  }
}

void ByteReader::require(std::size_t n, const char* what) const {
  if (remaining() < n) throw FormatError(std::string("truncated payload reading ") + what, pos_);
}

std::string ByteReader::get_string(const char* what) {
  const auto len = get<std::uint16_t>(what);
  require(len, what);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
  pos_ += len;
  return s;
}

Tensor ByteReader::get_f32(Index rows, Index cols, const char* what) {
  const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (count > remaining() / sizeof(float)) {
    throw FormatError(std::string("truncated payload reading ") + what, pos_);
  }
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < count; ++i) {
    float f;
    std::memcpy(&f, bytes_.data() + pos_ + i * sizeof(float), sizeof(float));
    t.data()[i] = f;
  }
  pos_ += count * sizeof(float);
  return t;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError("write failed for " + path.string());
}

}  // namespace embreg::io
