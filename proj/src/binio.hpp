#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "mfbose/error.hpp"
#include "mfbose/hash.hpp"

namespace mfbose::binio {

inline constexpr std::uint32_t kEndianTag = 0x01020304;

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf.insert(buf.end(), p, p + sizeof v);
  }
  template <class T>
  void put_array(const std::vector<T>& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    buf.insert(buf.end(), p, p + v.size() * sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint64_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
  /// Appends the FNV-1a checksum of everything written so far.
  void seal() {
    Fnv1a h;
    h.bytes(buf.data(), buf.size());
    put(h.digest());
  }
  std::vector<std::uint8_t> buf;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, std::string what) : bytes(b), what_(std::move(what)) {}
  template <class T>
  T get() {
    T v;
    take(&v, sizeof v);
    return v;
  }
  template <class T>
  std::vector<T> get_array(std::size_t n) {
    if (n > (bytes.size() - pos) / sizeof(T)) throw IoError(what_ + " truncated");
    std::vector<T> v(n);
    take(v.data(), n * sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (n > bytes.size() - pos) throw IoError(what_ + " truncated");
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
  void take(void* dst, std::size_t n) {
    if (n > bytes.size() - pos) throw IoError(what_ + " truncated");
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  }
  /// Checks magic, version, byte order and the trailing checksum.
  void header(const char (&magic)[8], std::uint32_t version) {
    if (bytes.size() < sizeof magic + sizeof(std::uint64_t)) throw IoError(what_ + " truncated");
    char got[8];
    take(got, sizeof got);
    if (std::memcmp(got, magic, sizeof got) != 0) throw IoError("not a " + what_ + " (bad magic)");
    const auto v = get<std::uint32_t>();
    if (v != version) throw IoError("unsupported " + what_ + " version " + std::to_string(v));
    if (get<std::uint32_t>() != kEndianTag) throw IoError(what_ + " written with foreign byte order");
    Fnv1a h;
    h.bytes(bytes.data(), bytes.size() - sizeof(std::uint64_t));
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - sizeof stored, sizeof stored);
    if (stored != h.digest()) throw IoError(what_ + " checksum mismatch");
  }
  void finish() const {
    if (pos + sizeof(std::uint64_t) != bytes.size()) throw IoError(what_ + " has trailing bytes");
  }
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

 private:
  std::string what_;
};

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace mfbose::binio
