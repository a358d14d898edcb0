#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "lpb/error.hpp"
#include "lpb/heat.hpp"

namespace lpb {

/// Mask of the 2-pixel band straddling the support boundary of `truth`: a
/// pixel is in the band if it is nonzero with a zero 4-neighbour (inner
/// edge) or zero with a nonzero 4-neighbour (outer edge). The domain
/// boundary counts as zero.
inline std::vector<std::uint8_t> boundary_band_mask(const GridField& truth) {
  const std::size_t n = truth.n;
  std::vector<std::uint8_t> mask(n * n, 0);
  auto inside = [&](std::size_t r, std::size_t c) {
    return truth.at(r, c) != 0.0;
  };
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const bool self = inside(r, c);
      bool neighbour_differs = false;
      if (r > 0 && inside(r - 1, c) != self) neighbour_differs = true;
      if (r + 1 < n && inside(r + 1, c) != self) neighbour_differs = true;
      if (c > 0 && inside(r, c - 1) != self) neighbour_differs = true;
      if (c + 1 < n && inside(r, c + 1) != self) neighbour_differs = true;
      if (self && r == 0) neighbour_differs = true;
      if (self && r + 1 == n) neighbour_differs = true;
      if (self && c == 0) neighbour_differs = true;
      if (self && c + 1 == n) neighbour_differs = true;
      if (neighbour_differs) mask[r * n + c] = 1;
    }
  }
  return mask;
}

struct ErrorMetrics {
  double relative_l2 = 0.0;  // |est - true| / |true|
  double max_abs = 0.0;
  double band_mean_abs = 0.0;  // mean abs error over the boundary band
};

inline ErrorMetrics error_metrics(const GridField& estimate,
                                  const GridField& truth) {
  if (estimate.n != truth.n) throw ShapeError("error_metrics: grid mismatch");
  double diff2 = 0.0, truth2 = 0.0;
  ErrorMetrics m;
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    const double d = estimate.values[i] - truth.values[i];
    diff2 += d * d;
    truth2 += truth.values[i] * truth.values[i];
    m.max_abs = std::max(m.max_abs, std::abs(d));
  }
  if (truth2 == 0.0) throw NumericError("error_metrics: zero-norm truth");
  m.relative_l2 = std::sqrt(diff2 / truth2);

  const std::vector<std::uint8_t> band = boundary_band_mask(truth);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < band.size(); ++i) {
    if (band[i]) {
      acc += std::abs(estimate.values[i] - truth.values[i]);
      ++count;
    }
  }
  m.band_mean_abs = count > 0 ? acc / static_cast<double>(count) : 0.0;
  return m;
}

/// Mean of |field| restricted to (mask != 0) and to its complement.
inline std::pair<double, double> masked_means(
    const std::vector<double>& values, const std::vector<std::uint8_t>& mask) {
  double in = 0.0, out = 0.0;
  std::size_t nin = 0, nout = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i]) {
      in += values[i];
      ++nin;
    } else {
      out += values[i];
      ++nout;
    }
  }
  return {nin ? in / static_cast<double>(nin) : 0.0,
          nout ? out / static_cast<double>(nout) : 0.0};
}

}  // namespace lpb
