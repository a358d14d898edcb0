#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "lpb/field_io.hpp"
#include "lpb/synthetic.hpp"

#include "oracles.hpp"

using lpb::Dataset;
using lpb::GridField;
using lpb::PatchParams;
using lpb::Rng;

namespace {
const double kLength = 2.0 * std::numbers::pi;

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}
}  // namespace

TEST_CASE("patch parameters respect their boxes") {
  Rng rng(1);
  for (int i = 0; i < 5000; ++i) {
    const PatchParams p = lpb::sample_patch(rng, kLength);
    CHECK(p.u0 >= 0.2 * kLength);
    CHECK(p.u0 <= 0.4 * kLength);
    CHECK(p.v0 >= 0.2 * kLength);
    CHECK(p.v0 <= 0.4 * kLength);
    CHECK(p.u1 >= 0.6 * kLength);
    CHECK(p.u1 <= 0.8 * kLength);
    CHECK(p.v1 >= 0.6 * kLength);
    CHECK(p.v1 <= 0.8 * kLength);
    CHECK(p.amplitude >= 9.0);
    CHECK(p.amplitude <= 11.0);
  }
}

TEST_CASE("amplitude mean over 1e5 draws sits at 10") {
  Rng rng(2);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += lpb::sample_patch(rng, kLength).amplitude;
  CHECK(std::abs(sum / n - 10.0) < 0.02);
}

TEST_CASE("fixed seed reproduces parameters") {
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) {
    const PatchParams pa = lpb::sample_patch(a, kLength);
    const PatchParams pb = lpb::sample_patch(b, kLength);
    CHECK(pa.u0 == pb.u0);
    CHECK(pa.v1 == pb.v1);
    CHECK(pa.amplitude == pb.amplitude);
  }
}

TEST_CASE("rasterization agrees with a brute-force point-in-rectangle check") {
  PatchParams p;
  p.u0 = 0.2 * kLength;
  p.v0 = 0.2 * kLength;
  p.u1 = 0.8 * kLength;
  p.v1 = 0.8 * kLength;
  p.amplitude = 9.0;
  const std::size_t n = 16;
  const GridField f = lpb::rasterize(p, n, kLength);

  const double h = kLength / (n + 1);
  std::size_t inside_count = 0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double x = (c + 1) * h;
      const double y = (r + 1) * h;
      const bool inside = x >= p.u0 && x <= p.u1 && y >= p.v0 && y <= p.v1;
      CHECK(f.at(r, c) == (inside ? 9.0 : 0.0));
      if (inside) ++inside_count;
    }
  }
  CHECK(inside_count > 0);

  double sum = 0.0;
  for (double v : f.values) sum += v;
  CHECK(sum == p.amplitude * static_cast<double>(inside_count));
}

TEST_CASE("dataset fields are two-valued rectangles") {
  const Dataset ds = lpb::build_dataset(200, 5, 16, kLength);
  REQUIRE(ds.fields.size() == 200);
  REQUIRE(ds.params.size() == 200);
  for (std::size_t s = 0; s < ds.fields.size(); ++s) {
    const GridField& f = ds.fields[s];
    std::set<double> values(f.values.begin(), f.values.end());
    REQUIRE(values.size() == 2);
    REQUIRE(*values.begin() == 0.0);
    const double amp = *values.rbegin();
    CHECK(amp >= 9.0);
    CHECK(amp <= 11.0);
    CHECK(amp == ds.params[s].amplitude);

    // Support must exactly fill its bounding box.
    std::size_t rmin = 16, rmax = 0, cmin = 16, cmax = 0;
    for (std::size_t r = 0; r < 16; ++r) {
      for (std::size_t c = 0; c < 16; ++c) {
        if (f.at(r, c) != 0.0) {
          rmin = std::min(rmin, r);
          rmax = std::max(rmax, r);
          cmin = std::min(cmin, c);
          cmax = std::max(cmax, c);
        }
      }
    }
    REQUIRE(rmin <= rmax);
    for (std::size_t r = rmin; r <= rmax; ++r) {
      for (std::size_t c = cmin; c <= cmax; ++c) {
        CHECK(f.at(r, c) == amp);
      }
    }
  }
}

TEST_CASE("patch parameter marginals pass a KS test at the 1% level") {
  Rng rng(9);
  const int n = 10000;
  std::vector<double> u0, v0, u1, amp;
  for (int i = 0; i < n; ++i) {
    const PatchParams p = lpb::sample_patch(rng, kLength);
    u0.push_back(p.u0);
    v0.push_back(p.v0);
    u1.push_back(p.u1);
    amp.push_back(p.amplitude);
  }
  const double critical = 1.6276 / std::sqrt(static_cast<double>(n));
  CHECK(oracle::ks_statistic_uniform(u0, 0.2 * kLength, 0.4 * kLength) < critical);
  CHECK(oracle::ks_statistic_uniform(v0, 0.2 * kLength, 0.4 * kLength) < critical);
  CHECK(oracle::ks_statistic_uniform(u1, 0.6 * kLength, 0.8 * kLength) < critical);
  CHECK(oracle::ks_statistic_uniform(amp, 9.0, 11.0) < critical);
}

TEST_CASE("dataset regeneration is bit-identical and fast enough") {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset a = lpb::build_dataset(5000, 11, 16, kLength);
  const auto t1 = std::chrono::steady_clock::now();
  CHECK(std::chrono::duration<double>(t1 - t0).count() < 10.0);

  const Dataset b = lpb::build_dataset(5000, 11, 16, kLength);
  REQUIRE(a.fields.size() == b.fields.size());
  for (std::size_t i = 0; i < a.fields.size(); ++i) {
    REQUIRE(a.fields[i].values == b.fields[i].values);
  }
}

TEST_CASE("measurements add the configured noise") {
  lpb::HeatOpConfig cfg;
  cfg.n = 16;
  lpb::ForwardOperator op(cfg);

  SECTION("vanishing noise recovers the clean measurement") {
    lpb::NoiseModel tiny{1e-12};
    Rng rng(3);
    const auto m = lpb::make_measurement(op, lpb::TargetMode::kPaperSquare, tiny, rng);
    for (std::size_t i = 0; i < m.observed.values.size(); ++i) {
      CHECK(std::abs(m.observed.values[i] - m.clean.values[i]) <= 1e-9);
    }
  }
  SECTION("fixed seed gives identical observations") {
    lpb::NoiseModel noise{1.0};
    Rng r1(4), r2(4);
    const auto m1 = lpb::make_measurement(op, lpb::TargetMode::kRandomPatch, noise, r1);
    const auto m2 = lpb::make_measurement(op, lpb::TargetMode::kRandomPatch, noise, r2);
    CHECK(m1.observed.values == m2.observed.values);
  }
  SECTION("paper target at paper config reports ~30% noise-to-signal") {
    lpb::HeatOpConfig paper;  // n = 32 defaults
    lpb::ForwardOperator pop(paper);
    lpb::NoiseModel noise{1.0};
    Rng rng(5);
    const auto m = lpb::make_measurement(pop, lpb::TargetMode::kPaperSquare, noise, rng);
    const double nts = m.noise_to_signal();
    INFO("noise-to-signal " << nts);
    CHECK(nts > 0.15);
    CHECK(nts < 0.5);
    // Clean field really is A applied to the target.
    const GridField ax = pop.apply(m.target);
    CHECK(ax.values == m.clean.values);
  }
}

TEST_CASE("dataset files round-trip bit-exactly") {
  const auto path = temp_file("lpb_test_dataset.gpd");
  const Dataset ds = lpb::build_dataset(7, 21, 8, kLength);
  lpb::write_dataset(ds, path.string());
  const Dataset back = lpb::read_dataset(path.string(), kLength);
  REQUIRE(back.fields.size() == ds.fields.size());
  CHECK(back.seed == ds.seed);
  CHECK(back.n == ds.n);
  for (std::size_t i = 0; i < ds.fields.size(); ++i) {
    CHECK(back.fields[i].values == ds.fields[i].values);
    CHECK(back.params[i].u0 == ds.params[i].u0);
    CHECK(back.params[i].amplitude == ds.params[i].amplitude);
  }
  std::filesystem::remove(path);
}

TEST_CASE("field files round-trip and reject corruption") {
  const auto path = temp_file("lpb_test_field.gpf");
  Rng rng(6);
  GridField f(8, kLength, rng.normal_vector(64));
  lpb::write_field(f, path.string());
  const GridField back = lpb::read_field(path.string(), kLength);
  CHECK(back.n == 8);
  CHECK(back.values == f.values);

  SECTION("wrong magic") {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE then some bytes";
    os.close();
    CHECK_THROWS_AS(lpb::read_field(path.string()), lpb::IoError);
  }
  SECTION("truncated payload") {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write("GPF1", 4);
    const std::uint32_t n = 8;
    os.write(reinterpret_cast<const char*>(&n), 4);
    os.write(reinterpret_cast<const char*>(&n), 4);
    const double v = 1.0;
    os.write(reinterpret_cast<const char*>(&v), 8);  // far too few values
    os.close();
    CHECK_THROWS_AS(lpb::read_field(path.string()), lpb::IoError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("dataset files reject bad headers") {
  const auto path = temp_file("lpb_bad_dataset.gpd");
  SECTION("wrong magic") {
    std::ofstream os(path, std::ios::binary);
    os << "GPXX";
    os.close();
    CHECK_THROWS_AS(lpb::read_dataset(path.string()), lpb::IoError);
  }
  SECTION("count mismatch with payload") {
    std::ofstream os(path, std::ios::binary);
    os.write("GPD1", 4);
    const std::uint32_t count = 10, n = 8;
    const std::uint64_t seed = 0;
    const std::uint32_t flags = 0;
    os.write(reinterpret_cast<const char*>(&count), 4);
    os.write(reinterpret_cast<const char*>(&n), 4);
    os.write(reinterpret_cast<const char*>(&n), 4);
    os.write(reinterpret_cast<const char*>(&seed), 8);
    os.write(reinterpret_cast<const char*>(&flags), 4);
    const double v = 2.0;
    os.write(reinterpret_cast<const char*>(&v), 8);  // only one value
    os.close();
    CHECK_THROWS_AS(lpb::read_dataset(path.string()), lpb::IoError);
  }
  std::filesystem::remove(path);
}
