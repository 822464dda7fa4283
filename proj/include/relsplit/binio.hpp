#ifndef RELSPLIT_BINIO_HPP
#define RELSPLIT_BINIO_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relsplit::io {

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view bytes);

/// Splits on '\n'; a trailing newline does not produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view data);

std::uint32_t crc32(std::string_view bytes);

/// 64-bit FNV-1a, used for dataset fingerprints.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t state = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Little-endian append/read helpers for the checkpoint format.
class ByteWriter {
public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view b) { buf_.append(b); }
  const std::string &str() const { return buf_; }

private:
  std::string buf_;
};

class ByteReader {
public:
  explicit ByteReader(std::string_view data) : data_(data) {}
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);
  std::size_t remaining() const { return data_.size() - pos_; }

private:
  void need(std::size_t n) const;
  std::string_view data_;
  std::size_t pos_ = 0;
};

} // namespace relsplit::io

#endif // RELSPLIT_BINIO_HPP
