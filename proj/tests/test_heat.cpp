#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "lpb/heat.hpp"
#include "lpb/rng.hpp"

#include "oracles.hpp"

using lpb::ForwardOperator;
using lpb::GridField;
using lpb::HeatOpConfig;
using lpb::Rng;

namespace {

std::vector<double> random_field(Rng& rng, std::size_t n) {
  return rng.normal_vector(n * n);
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace

TEST_CASE("zero steps and zero conductivity give the identity") {
  Rng rng(1);
  HeatOpConfig cfg;
  cfg.n = 8;
  cfg.steps = 0;
  ForwardOperator op(cfg);
  const std::vector<double> x = random_field(rng, 8);
  CHECK(op.apply(x) == x);

  HeatOpConfig cfg2;
  cfg2.n = 8;
  cfg2.kappa = 0.0;
  cfg2.steps = 100;
  ForwardOperator op2(cfg2);
  CHECK(op2.apply(x) == x);

  const auto eig = op2.spectrum(64);
  for (double e : eig) CHECK(e == 1.0);
}

TEST_CASE("apply is linear and annihilates zero") {
  Rng rng(2);
  HeatOpConfig cfg;
  cfg.n = 8;
  ForwardOperator op(cfg);
  GridField zero(8, cfg.length);
  const GridField out = op.apply(zero);
  for (double v : out.values) CHECK(v == 0.0);

  const std::vector<double> x1 = random_field(rng, 8);
  const std::vector<double> x2 = random_field(rng, 8);
  const double a = 1.3, b = -0.7;
  std::vector<double> mix(x1.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x1[i] + b * x2[i];
  const std::vector<double> lhs = op.apply(mix);
  const std::vector<double> y1 = op.apply(x1);
  const std::vector<double> y2 = op.apply(x2);
  for (std::size_t i = 0; i < mix.size(); ++i) {
    CHECK(std::abs(lhs[i] - (a * y1[i] + b * y2[i])) < 1e-12);
  }
}

TEST_CASE("small grid matches the dense-matrix oracle") {
  HeatOpConfig cfg;
  cfg.n = 4;
  cfg.steps = 25;
  ForwardOperator op(cfg);
  const Eigen::MatrixXd dense = oracle::dense_forward_operator(cfg);

  Rng rng(3);
  const std::vector<double> x = random_field(rng, 4);
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), 16);
  const Eigen::VectorXd want = dense * xv;
  const std::vector<double> got = op.apply(x);
  for (int i = 0; i < 16; ++i) {
    CHECK(std::abs(got[i] - want[i]) < 1e-10);
  }

  const std::vector<double> spec = op.spectrum(16);
  const std::vector<double> dense_spec = oracle::dense_spectrum(cfg);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(oracle::rel_err(spec[i], dense_spec[i]) < 1e-10);
  }
}

TEST_CASE("lowest oracle eigenmode is rescaled, not rotated") {
  HeatOpConfig cfg;
  cfg.n = 8;
  ForwardOperator op(cfg);
  const Eigen::MatrixXd single = oracle::dense_single_step(cfg);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(single);
  // Smallest eigenvalue of (I + dt K) pairs with the smallest Laplacian mode.
  const Eigen::VectorXd mode = es.eigenvectors().col(0);
  const double factor =
      std::pow(es.eigenvalues()[0], -static_cast<double>(cfg.steps));

  std::vector<double> x(mode.data(), mode.data() + mode.size());
  const std::vector<double> got = op.apply(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(oracle::rel_err(got[i], factor * x[i]) <= 1e-8);
  }
}

TEST_CASE("adjoint identity and symmetry") {
  Rng rng(4);
  for (std::size_t n : {8u, 16u}) {
    HeatOpConfig cfg;
    cfg.n = n;
    ForwardOperator op(cfg);
    for (int pair = 0; pair < 20; ++pair) {
      const std::vector<double> x = random_field(rng, n);
      const std::vector<double> y = random_field(rng, n);
      const std::vector<double> ax = op.apply(x);
      const std::vector<double> aty = op.apply_adjoint(y);
      const double lhs = lpb::dot(ax, y);
      const double rhs = lpb::dot(x, aty);
      CHECK(std::abs(lhs - rhs) <=
            1e-10 * lpb::norm2(x) * lpb::norm2(y));
      // The construction is symmetric, so both routes coincide bit-near.
      const std::vector<double> ay = op.apply(y);
      CHECK(rel_diff(aty, ay) <= 1e-12);
    }
  }
}

TEST_CASE("paper configuration spectrum decays from the analytic top value") {
  HeatOpConfig cfg;  // defaults are the paper values
  ForwardOperator op(cfg);
  const std::vector<double> eig = op.spectrum(1024);

  // Largest eigenvalue: (1 + dt kappa lambda_1)^-Nt with lambda_1 the
  // smallest discrete Dirichlet-Laplacian eigenvalue on the 32^2 grid.
  const double h = cfg.length / 33.0;
  const double s = std::sin(std::numbers::pi / 66.0);
  const double lambda1 = 2.0 * (4.0 / (h * h)) * s * s;
  const double top = std::pow(1.0 + cfg.dt * cfg.kappa * lambda1, -100.0);
  CHECK(oracle::rel_err(eig[0], top) < 1e-12);

  // Continuous-limit estimate e^{-0.32}.
  CHECK(std::abs(eig[0] - std::exp(-0.32)) / std::exp(-0.32) < 0.05);

  // Monotone non-increasing overall; strictly decreasing across distinct
  // values (symmetric modes tie exactly).
  for (std::size_t i = 1; i < eig.size(); ++i) {
    CHECK(eig[i] <= eig[i - 1]);
  }
  CHECK(eig.front() > eig.back());
}

TEST_CASE("single-step solve satisfies its residual contract") {
  Rng rng(5);
  HeatOpConfig cfg;
  cfg.n = 8;
  ForwardOperator op(cfg);

  SECTION("zero right-hand side") {
    std::vector<double> zero(64, 0.0);
    const std::vector<double> u = op.single_step_solve(zero);
    for (double v : u) CHECK(v == 0.0);
  }
  SECTION("zero conductivity is the identity") {
    HeatOpConfig id = cfg;
    id.kappa = 0.0;
    ForwardOperator op_id(id);
    const std::vector<double> v = random_field(rng, 8);
    CHECK(op_id.single_step_solve(v) == v);
  }
  SECTION("matches the dense solve") {
    const std::vector<double> v = random_field(rng, 8);
    const std::vector<double> u = op.single_step_solve(v);
    const Eigen::MatrixXd m = oracle::dense_single_step(cfg);
    Eigen::Map<const Eigen::VectorXd> vv(v.data(), 64);
    const Eigen::VectorXd want = m.ldlt().solve(vv);
    for (int i = 0; i < 64; ++i) {
      CHECK(std::abs(u[i] - want[i]) < 1e-10);
    }
    // Residual contract.
    std::vector<double> res(64);
    op.single_step_matvec(u, res);
    double num = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
      num += (res[i] - v[i]) * (res[i] - v[i]);
    }
    CHECK(std::sqrt(num) <= 1e-12 * lpb::norm2(v));
  }
}

TEST_CASE("diagonalized apply agrees with repeated implicit Euler steps") {
  Rng rng(6);
  HeatOpConfig cfg;
  cfg.n = 8;
  cfg.steps = 12;
  ForwardOperator op(cfg);
  const std::vector<double> x = random_field(rng, 8);
  std::vector<double> u = x;
  for (std::size_t s = 0; s < cfg.steps; ++s) u = op.single_step_solve(u);
  CHECK(rel_diff(op.apply(x), u) < 1e-10);
}

TEST_CASE("half-horizon composition and smoothing") {
  Rng rng(7);
  HeatOpConfig cfg;
  cfg.n = 8;
  cfg.steps = 10;
  HeatOpConfig half = cfg;
  half.steps = 5;
  ForwardOperator full(cfg), twice(half);
  const std::vector<double> x = random_field(rng, 8);
  CHECK(rel_diff(full.apply(x), twice.apply(twice.apply(x))) < 1e-10);

  for (int i = 0; i < 10; ++i) {
    const std::vector<double> v = random_field(rng, 8);
    CHECK(lpb::norm2(full.apply(v)) <= lpb::norm2(v));
  }
}

TEST_CASE("configuration and shape errors") {
  HeatOpConfig bad;
  bad.n = 2;
  CHECK_THROWS_AS(ForwardOperator(bad), lpb::ConfigError);
  bad = HeatOpConfig{};
  bad.dt = 0.0;
  CHECK_THROWS_AS(ForwardOperator(bad), lpb::ConfigError);
  bad = HeatOpConfig{};
  bad.kappa = -1.0;
  CHECK_THROWS_AS(ForwardOperator(bad), lpb::ConfigError);

  HeatOpConfig cfg;
  cfg.n = 8;
  ForwardOperator op(cfg);
  GridField wrong(4, cfg.length);
  CHECK_THROWS_AS(op.apply(wrong), lpb::ShapeError);
  CHECK_THROWS_AS(op.spectrum(65), lpb::ConfigError);
}
