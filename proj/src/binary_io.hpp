#pragma once

// Little-endian container used by the corpus cache and model files:
//   magic (8 bytes) | version (u32) | payload | FNV-1a 64 checksum (u64)
// The checksum covers everything before it.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mltm/error.hpp"

namespace mltm::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class BinaryWriter {
 public:
  BinaryWriter(std::string_view magic, std::uint32_t version) {
    buffer_.append(magic);
    put(version);
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buffer_.append(raw, sizeof(T));
  }

  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    buffer_.append(s);
  }

  template <typename T>
  void put_vector(const std::vector<T>& values) {
    put<std::uint64_t>(values.size());
    const auto* raw = reinterpret_cast<const char*>(values.data());
    buffer_.append(raw, values.size() * sizeof(T));
  }

  // Appends the checksum and returns the finished byte string.
  std::string finish() && {
    put(fnv1a(buffer_));
    return std::move(buffer_);
  }

 private:
  std::string buffer_;
};

class BinaryReader {
 public:
  // Validates magic, checksum and version before any payload is read.
  BinaryReader(std::string_view bytes, std::string_view magic,
               std::uint32_t expected_version, std::string what)
      : bytes_(bytes), what_(std::move(what)) {
    const std::size_t min_size = magic.size() + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes_.size() < min_size) fail("file too short");
    if (bytes_.substr(0, magic.size()) != magic) fail("bad magic header");
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes_.data() + bytes_.size() - sizeof stored, sizeof stored);
    bytes_ = bytes_.substr(0, bytes_.size() - sizeof stored);
    if (fnv1a(bytes_) != stored) fail("checksum mismatch (truncated or corrupted)");
    pos_ = magic.size();
    const auto version = get<std::uint32_t>();
    if (version != expected_version) throw VersionError(what_, expected_version, version);
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  template <typename T>
  std::vector<T> get_vector() {
    const auto n = get<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / sizeof(T)) fail("truncated array");
    std::vector<T> values(n);
    std::memcpy(values.data(), bytes_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return values;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

  void expect_end() const {
    if (!at_end()) fail("trailing bytes after payload");
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw IntegrityError(what_ + ": " + why);
  }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) fail("truncated payload");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace mltm::detail
