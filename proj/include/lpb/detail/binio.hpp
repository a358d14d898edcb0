#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "lpb/error.hpp"

namespace lpb::detail {

// Little-endian scalar IO, independent of host byte order.

template <class T>
inline void write_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>(u >> (8 * i));
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

inline void write_f64(std::ostream& os, double value) {
  write_le(os, std::bit_cast<std::uint64_t>(value));
}

template <class T>
inline T read_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw IoError("truncated file while reading " + what);
  }
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
  }
  return static_cast<T>(u);
}

inline double read_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

inline void write_magic(std::ostream& os, const char magic[5]) {
  os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[5],
                         const std::string& path) {
  char buf[4];
  if (!is.read(buf, 4)) {
    throw IoError(path + ": truncated header");
  }
  if (std::memcmp(buf, magic, 4) != 0) {
    throw IoError(path + ": bad magic, expected \"" + std::string(magic, 4) +
                  "\"");
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return is;
}

}  // namespace lpb::detail
