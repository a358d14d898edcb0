#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lpb/error.hpp"
#include "lpb/tensor.hpp"

namespace lpb {

struct BfgsOptions {
  double gradient_tol = 1e-8;
  std::size_t max_iterations = 500;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  std::size_t max_backtracks = 50;
};

struct BfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Quasi-Newton minimizer with a dense inverse-Hessian update and Armijo
/// backtracking line search. `fg(x, grad_out)` returns the objective value
/// and fills the gradient. Intended for low-dimensional problems.
template <class Objective>
BfgsResult bfgs_minimize(Objective&& fg, std::vector<double> x0,
                         const BfgsOptions& opt = {}) {
  const std::size_t d = x0.size();
  std::vector<double> h(d * d, 0.0);  // inverse Hessian approximation
  auto reset_h = [&] {
    for (double& v : h) v = 0.0;
    for (std::size_t i = 0; i < d; ++i) h[i * d + i] = 1.0;
  };
  reset_h();

  BfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(d), g_next(d), p(d), x_next(d), s(d), y(d), hy(d);
  res.value = fg(std::span<const double>(res.x), std::span<double>(g));
  res.gradient_norm = norm2(g);

  for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
    if (res.gradient_norm <= opt.gradient_tol) {
      res.converged = true;
      return res;
    }
    // p = -H g
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      const double* row = h.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) acc += row[j] * g[j];
      p[i] = -acc;
    }
    double slope = dot(p, g);
    if (!(slope < 0.0)) {  // not a descent direction; fall back to steepest
      reset_h();
      for (std::size_t i = 0; i < d; ++i) p[i] = -g[i];
      slope = -dot(g, g);
    }

    double step = 1.0;
    double value_next = 0.0;
    bool accepted = false;
    for (std::size_t bt = 0; bt <= opt.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < d; ++i) x_next[i] = res.x[i] + step * p[i];
      value_next =
          fg(std::span<const double>(x_next), std::span<double>(g_next));
      if (std::isfinite(value_next) &&
          value_next <= res.value + opt.armijo_c * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.backtrack_factor;
    }
    res.iterations = iter + 1;
    if (!accepted) {
      return res;  // line search stalled; report best point found
    }

    for (std::size_t i = 0; i < d; ++i) {
      s[i] = x_next[i] - res.x[i];
      y[i] = g_next[i] - g[i];
    }
    res.x = x_next;
    res.value = value_next;
    g = g_next;
    res.gradient_norm = norm2(g);

    const double sy = dot(s, y);
    if (sy > 1e-12 * norm2(s) * norm2(y)) {
      // H <- (I - s y^T / sy) H (I - y s^T / sy) + s s^T / sy
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        const double* row = h.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) acc += row[j] * y[j];
        hy[i] = acc;
      }
      const double yhy = dot(y, hy);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          h[i * d + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) +
                          rho * (1.0 + rho * yhy) * s[i] * s[j];
        }
      }
    }
  }
  return res;
}

}  // namespace lpb
