#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "textent/common.hpp"

namespace textent {

// Little-endian primitives for the .txe and .txm containers.

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  void str(std::string_view s) {
    u32(checked_u32(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  static std::uint32_t checked_u32(std::size_t n) {
    require(n <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::invalid_argument,
            "length does not fit in u32");
    return static_cast<std::uint32_t>(n);
  }

 private:
  template <typename U>
  void put_le(U v) {
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, sizeof(U));
  }

  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in_ || got != tag) fail("bad magic, expected " + std::string(tag));
  }

  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

  std::string str() {
    const auto n = u32();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) fail("truncated string");
    return s;
  }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::malformed_file, source_ + ": " + what);
  }

 private:
  template <typename U>
  U get_le() {
    unsigned char buf[sizeof(U)];
    in_.read(reinterpret_cast<char*>(buf), sizeof(U));
    if (!in_) fail("unexpected end of file");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }

  std::istream& in_;
  std::string source_;
};

inline std::ifstream open_input(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? (std::ios::binary | std::ios::trunc) : std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  return out;
}

inline std::uint64_t hash_file(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  Fnv1a h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update({buf, static_cast<std::size_t>(in.gcount())});
  }
  return h.digest();
}

}  // namespace textent
