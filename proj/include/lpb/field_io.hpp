#pragma once

#include <cstdint>
#include <numbers>
#include <string>

#include "lpb/detail/binio.hpp"
#include "lpb/heat.hpp"

namespace lpb {

// GPF1 field file: magic "GPF1", u32 n, u32 n, then n^2 little-endian
// 64-bit reals, row-major. The domain edge length is configuration, not
// file payload.

inline void write_field(const GridField& field, const std::string& path) {
  auto os = detail::open_out(path);
  detail::write_magic(os, "GPF1");
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(field.n));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(field.n));
  for (double v : field.values) detail::write_f64(os, v);
  if (!os) throw IoError("write failed: " + path);
}

inline GridField read_field(const std::string& path,
                            double length = 2.0 * std::numbers::pi) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "GPF1", path);
  const auto rows = detail::read_le<std::uint32_t>(is, "rows");
  const auto cols = detail::read_le<std::uint32_t>(is, "cols");
  if (rows != cols || rows == 0) {
    throw IoError(path + ": field header must be square and non-empty");
  }
  GridField field(rows, length);
  for (double& v : field.values) v = detail::read_f64(is, "field values");
  return field;
}

}  // namespace lpb
