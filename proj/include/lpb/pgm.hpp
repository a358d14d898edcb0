#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "lpb/error.hpp"
#include "lpb/heat.hpp"

namespace lpb {

enum class PgmNormalization : std::uint8_t {
  kFixedRange,  // [0, 12] -> [0, 255], clamped
  kPerImage,    // [min, max] -> [0, 255]; constant images map to 0
};

/// 8-bit binary PGM (P5) export. Rounding is half-up: a value mapping to
/// 127.5 becomes pixel 128.
inline void export_pgm(const GridField& field, const std::string& path,
                       PgmNormalization mode = PgmNormalization::kFixedRange) {
  for (double v : field.values) {
    if (!std::isfinite(v)) throw NumericError("export_pgm: non-finite field");
  }
  double lo = 0.0, hi = 12.0;
  if (mode == PgmNormalization::kPerImage) {
    lo = *std::min_element(field.values.begin(), field.values.end());
    hi = *std::max_element(field.values.begin(), field.values.end());
  }
  const double span = hi - lo;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "P5\n" << field.n << " " << field.n << "\n255\n";
  for (double v : field.values) {
    double t = span > 0.0 ? (v - lo) / span * 255.0 : 0.0;
    t = std::clamp(t, 0.0, 255.0);
    const int pixel = static_cast<int>(std::floor(t + 0.5));
    os.put(static_cast<char>(std::clamp(pixel, 0, 255)));
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace lpb
