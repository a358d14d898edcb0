#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lpb/detail/binio.hpp"
#include "lpb/error.hpp"
#include "lpb/heat.hpp"
#include "lpb/rng.hpp"

namespace lpb {

/// Axis-aligned hot rectangle in domain coordinates. u is horizontal, v is
/// vertical (positive downward). Corners are drawn uniformly from
/// [0.2 L, 0.4 L] (top-left) and [0.6 L, 0.8 L] (bottom-right); the amplitude
/// is uniform on [9, 11].
struct PatchParams {
  double u0 = 0.0, v0 = 0.0;  // top-left
  double u1 = 0.0, v1 = 0.0;  // bottom-right
  double amplitude = 0.0;
};

struct NoiseModel {
  double sigma = 1.0;  // iid per-pixel standard deviation

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("noise model: sigma must be > 0");
  }
};

struct Dataset {
  std::size_t n = 0;
  double length = 0.0;
  std::uint64_t seed = 0;
  std::vector<GridField> fields;
  std::vector<PatchParams> params;  // empty when not recorded
};

enum class TargetMode {
  kPaperSquare,  // centered square of edge length/2, amplitude 10
  kRandomPatch,  // fresh sample_patch draw
};

struct MeasurementProblem {
  GridField target;      // x*
  GridField clean;       // y* = A x*
  GridField observed;    // y_hat = y* + noise
  NoiseModel noise;
  HeatOpConfig forward_config;

  double noise_to_signal() const {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < clean.values.size(); ++i) {
      const double d = observed.values[i] - clean.values[i];
      num += d * d;
      den += clean.values[i] * clean.values[i];
    }
    if (den == 0.0) throw NumericError("noise_to_signal: clean field is zero");
    return std::sqrt(num / den);
  }
};

inline PatchParams sample_patch(Rng& rng, double length) {
  PatchParams p;
  p.u0 = rng.uniform(0.2 * length, 0.4 * length);
  p.v0 = rng.uniform(0.2 * length, 0.4 * length);
  p.u1 = rng.uniform(0.6 * length, 0.8 * length);
  p.v1 = rng.uniform(0.6 * length, 0.8 * length);
  p.amplitude = rng.uniform(9.0, 11.0);
  return p;
}

/// Field equal to the amplitude on grid nodes inside the closed rectangle
/// and zero elsewhere. Continuous corners are not snapped to nodes.
inline GridField rasterize(const PatchParams& p, std::size_t n, double length) {
  GridField field(n, length);
  const double h = field.spacing();
  for (std::size_t r = 0; r < n; ++r) {
    const double y = static_cast<double>(r + 1) * h;
    if (y < p.v0 || y > p.v1) continue;
    for (std::size_t c = 0; c < n; ++c) {
      const double x = static_cast<double>(c + 1) * h;
      if (x >= p.u0 && x <= p.u1) field.at(r, c) = p.amplitude;
    }
  }
  return field;
}

/// Training set of rasterized random patches. Each sample draws from its own
/// rng stream derived from `seed`, so the set is reproducible and
/// order-independent.
inline Dataset build_dataset(std::size_t count, std::uint64_t seed,
                             std::size_t n, double length,
                             bool record_params = true) {
  if (count < 1) throw ConfigError("build_dataset: count must be >= 1");
  Dataset ds;
  ds.n = n;
  ds.length = length;
  ds.seed = seed;
  ds.fields.reserve(count);
  if (record_params) ds.params.reserve(count);
  Rng master(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Rng stream = master.stream(i);
    const PatchParams p = sample_patch(stream, length);
    ds.fields.push_back(rasterize(p, n, length));
    if (record_params) ds.params.push_back(p);
  }
  return ds;
}

inline GridField paper_target(std::size_t n, double length) {
  PatchParams p;
  p.u0 = 0.25 * length;
  p.v0 = 0.25 * length;
  p.u1 = 0.75 * length;
  p.v1 = 0.75 * length;
  p.amplitude = 10.0;
  return rasterize(p, n, length);
}

inline MeasurementProblem make_measurement(const ForwardOperator& op,
                                           TargetMode mode,
                                           const NoiseModel& noise, Rng& rng) {
  noise.validate();
  MeasurementProblem m;
  m.noise = noise;
  m.forward_config = op.config();
  const std::size_t n = op.grid_n();
  const double length = op.config().length;
  m.target = mode == TargetMode::kPaperSquare
                 ? paper_target(n, length)
                 : rasterize(sample_patch(rng, length), n, length);
  m.clean = op.apply(m.target);
  m.observed = m.clean;
  for (double& v : m.observed.values) v += noise.sigma * rng.normal();
  return m;
}

// GPD1 dataset file: magic "GPD1", u32 count, u32 n, u32 n, u64 seed,
// u32 flags (bit 0: params block present), count * n^2 f64 field values
// back-to-back, then (if flagged) count * 5 f64 patch parameters
// (u0, v0, u1, v1, amplitude).

inline void write_dataset(const Dataset& ds, const std::string& path) {
  if (!ds.params.empty() && ds.params.size() != ds.fields.size()) {
    throw IoError("write_dataset: params/fields count mismatch");
  }
  auto os = detail::open_out(path);
  detail::write_magic(os, "GPD1");
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.fields.size()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.n));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.n));
  detail::write_le<std::uint64_t>(os, ds.seed);
  detail::write_le<std::uint32_t>(os, ds.params.empty() ? 0u : 1u);
  for (const GridField& f : ds.fields) {
    for (double v : f.values) detail::write_f64(os, v);
  }
  for (const PatchParams& p : ds.params) {
    detail::write_f64(os, p.u0);
    detail::write_f64(os, p.v0);
    detail::write_f64(os, p.u1);
    detail::write_f64(os, p.v1);
    detail::write_f64(os, p.amplitude);
  }
  if (!os) throw IoError("write failed: " + path);
}

inline Dataset read_dataset(const std::string& path,
                            double length = 2.0 * std::numbers::pi) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "GPD1", path);
  const auto count = detail::read_le<std::uint32_t>(is, "count");
  const auto rows = detail::read_le<std::uint32_t>(is, "rows");
  const auto cols = detail::read_le<std::uint32_t>(is, "cols");
  if (rows != cols || rows == 0 || count == 0) {
    throw IoError(path + ": invalid dataset header");
  }
  Dataset ds;
  ds.n = rows;
  ds.length = length;
  ds.seed = detail::read_le<std::uint64_t>(is, "seed");
  const auto flags = detail::read_le<std::uint32_t>(is, "flags");
  ds.fields.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    GridField f(rows, length);
    for (double& v : f.values) v = detail::read_f64(is, "field values");
    ds.fields.push_back(std::move(f));
  }
  if (flags & 1u) {
    ds.params.resize(count);
    for (PatchParams& p : ds.params) {
      p.u0 = detail::read_f64(is, "params");
      p.v0 = detail::read_f64(is, "params");
      p.u1 = detail::read_f64(is, "params");
      p.v1 = detail::read_f64(is, "params");
      p.amplitude = detail::read_f64(is, "params");
    }
  }
  return ds;
}

}  // namespace lpb
