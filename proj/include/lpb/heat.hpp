#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lpb/cg.hpp"
#include "lpb/detail/matrix.hpp"
#include "lpb/error.hpp"

namespace lpb {

/// Scalar field on a uniform n x n interior grid of a square domain with
/// homogeneous Dirichlet boundary. Row-major storage; the row index is the
/// vertical coordinate, increasing downward. Interior node (r, c) sits at
/// coordinates ((c+1) h, (r+1) h) with h = length / (n + 1).
struct GridField {
  std::size_t n = 0;
  double length = 2.0 * std::numbers::pi;
  std::vector<double> values;

  GridField() = default;
  GridField(std::size_t n_, double length_)
      : n(n_), length(length_), values(n_ * n_, 0.0) {}
  GridField(std::size_t n_, double length_, std::vector<double> v)
      : n(n_), length(length_), values(std::move(v)) {
    if (values.size() != n * n) {
      throw ShapeError("grid field needs n^2 values");
    }
  }

  double spacing() const { return length / static_cast<double>(n + 1); }
  double& at(std::size_t row, std::size_t col) { return values[row * n + col]; }
  double at(std::size_t row, std::size_t col) const {
    return values[row * n + col];
  }
};

struct HeatOpConfig {
  std::size_t n = 32;
  double length = 2.0 * std::numbers::pi;
  double kappa = 0.64;
  double dt = 0.01;
  std::size_t steps = 100;

  void validate() const {
    if (n < 3) throw ConfigError("heat operator: n must be >= 3");
    if (kappa < 0.0) throw ConfigError("heat operator: kappa must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("heat operator: dt must be > 0");
    if (!(length > 0.0)) throw ConfigError("heat operator: length must be > 0");
  }
};

/// out = -Laplacian(in) with the 5-point stencil, zero Dirichlet boundary.
inline void negative_laplacian(std::span<const double> in,
                               std::span<double> out, std::size_t n,
                               double h) {
  const double inv_h2 = 1.0 / (h * h);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t i = r * n + c;
      double acc = 4.0 * in[i];
      if (r > 0) acc -= in[i - n];
      if (r + 1 < n) acc -= in[i + n];
      if (c > 0) acc -= in[i - 1];
      if (c + 1 < n) acc -= in[i + 1];
      out[i] = acc * inv_h2;
    }
  }
}

/// Discrete map from initial temperature to temperature after `steps`
/// backward-Euler increments of the heat equation: Nt repeated solves of
/// (I + dt K) u = v with K = kappa * (-Laplacian_h).
///
/// K's eigenbasis on this grid is the tensor product of discrete sine modes,
/// so apply() diagonalizes the operator exactly instead of time-stepping;
/// single_step_solve() keeps an iterative CG path against the same matrix,
/// and the two routes are cross-checked in the test suite. The operator is
/// immutable after construction and safe for concurrent use.
class ForwardOperator {
 public:
  explicit ForwardOperator(const HeatOpConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const std::size_t n = cfg.n;
    const double h = spacing();
    sine_.resize(n * n);
    lambda_.resize(n);
    const double norm = std::sqrt(2.0 / static_cast<double>(n + 1));
    for (std::size_t p = 0; p < n; ++p) {
      const double s =
          std::sin(static_cast<double>(p + 1) * std::numbers::pi /
                   (2.0 * static_cast<double>(n + 1)));
      lambda_[p] = 4.0 / (h * h) * s * s;
      for (std::size_t i = 0; i < n; ++i) {
        sine_[i * n + p] =
            norm * std::sin(static_cast<double>((i + 1) * (p + 1)) *
                            std::numbers::pi / static_cast<double>(n + 1));
      }
    }
    gain_.resize(n * n);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = 0; q < n; ++q) {
        const double one_step = 1.0 + cfg.dt * cfg.kappa * (lambda_[p] + lambda_[q]);
        gain_[p * n + q] =
            std::pow(one_step, -static_cast<double>(cfg.steps));
      }
    }
    identity_ = cfg.kappa == 0.0 || cfg.steps == 0;
  }

  const HeatOpConfig& config() const { return cfg_; }
  std::size_t grid_n() const { return cfg_.n; }
  double spacing() const {
    return cfg_.length / static_cast<double>(cfg_.n + 1);
  }
  std::size_t input_dim() const { return cfg_.n * cfg_.n; }
  std::size_t output_dim() const { return cfg_.n * cfg_.n; }

  /// y = A x on flat row-major values.
  std::vector<double> apply(std::span<const double> x) const {
    check_size(x.size());
    if (identity_) return {x.begin(), x.end()};
    const std::size_t n = cfg_.n;
    std::vector<double> tmp(n * n), coef(n * n);
    // Coefficients of x in the orthonormal sine basis: C = S X S.
    detail::matmul(tmp.data(), x.data(), sine_.data(), n, n, n);
    detail::matmul(coef.data(), sine_.data(), tmp.data(), n, n, n);
    for (std::size_t i = 0; i < n * n; ++i) coef[i] *= gain_[i];
    detail::matmul(tmp.data(), coef.data(), sine_.data(), n, n, n);
    std::vector<double> out(n * n);
    detail::matmul(out.data(), sine_.data(), tmp.data(), n, n, n);
    return out;
  }

  /// A is symmetric, so the adjoint coincides with the forward map.
  std::vector<double> apply_adjoint(std::span<const double> y) const {
    return apply(y);
  }

  GridField apply(const GridField& x) const {
    check_field(x);
    return GridField(cfg_.n, cfg_.length, apply(std::span<const double>(x.values)));
  }

  GridField apply_adjoint(const GridField& y) const { return apply(y); }

  /// Top-k eigenvalues of A, descending. k <= n^2.
  std::vector<double> spectrum(std::size_t k) const {
    if (k > gain_.size()) {
      throw ConfigError("spectrum: k exceeds n^2");
    }
    std::vector<double> eig = identity_
                                  ? std::vector<double>(gain_.size(), 1.0)
                                  : gain_;
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    eig.resize(k);
    return eig;
  }

  /// u solving (I + dt K) u = v by conjugate gradient; residual contract
  /// ||(I + dt K) u - v|| <= 1e-12 ||v||.
  std::vector<double> single_step_solve(std::span<const double> v) const {
    check_size(v.size());
    std::vector<double> u(v.begin(), v.end());  // warm start at v
    auto matvec = [this](std::span<const double> in, std::span<double> out) {
      single_step_matvec(in, out);
    };
    cg_solve(matvec, v, std::span<double>(u), 1e-12, 20 * cfg_.n * cfg_.n + 100);
    return u;
  }

  GridField single_step_solve(const GridField& v) const {
    check_field(v);
    return GridField(cfg_.n, cfg_.length,
                     single_step_solve(std::span<const double>(v.values)));
  }

  /// out = (I + dt K) in.
  void single_step_matvec(std::span<const double> in,
                          std::span<double> out) const {
    negative_laplacian(in, out, cfg_.n, spacing());
    const double a = cfg_.dt * cfg_.kappa;
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + a * out[i];
  }

 private:
  void check_size(std::size_t len) const {
    if (len != cfg_.n * cfg_.n) {
      throw ShapeError("field has " + std::to_string(len) +
                       " values, operator grid needs " +
                       std::to_string(cfg_.n * cfg_.n));
    }
  }
  void check_field(const GridField& f) const {
    if (f.n != cfg_.n) {
      throw ShapeError("grid mismatch: field n=" + std::to_string(f.n) +
                       ", operator n=" + std::to_string(cfg_.n));
    }
    check_size(f.values.size());
  }

  HeatOpConfig cfg_;
  std::vector<double> sine_;    // n x n orthonormal sine transform
  std::vector<double> lambda_;  // 1-D Dirichlet Laplacian eigenvalues
  std::vector<double> gain_;    // per-mode factors (1 + dt k (l_p + l_q))^-Nt
  bool identity_ = false;
};

inline ForwardOperator assemble_operator(const HeatOpConfig& cfg) {
  return ForwardOperator(cfg);
}

}  // namespace lpb
