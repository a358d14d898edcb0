#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lpb/error.hpp"
#include "lpb/tensor.hpp"

namespace lpb {

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradient for symmetric positive-definite systems.
///
/// `matvec(in, out)` must implement out = M * in. Convergence is declared on
/// the TRUE residual ||b - M x|| <= rel_tol * ||b||; if the recurrence
/// residual drifts, the iteration restarts from the current x. Throws
/// NumericError if the iteration cap is hit first.
template <class MatVec>
CgResult cg_solve(MatVec&& matvec, std::span<const double> rhs,
                  std::span<double> x, double rel_tol,
                  std::size_t max_iterations) {
  const std::size_t n = rhs.size();
  const double rhs_norm = norm2(rhs);
  if (rhs_norm == 0.0) {
    for (double& v : x) v = 0.0;
    return {0, 0.0};
  }
  const double stop = rel_tol * rhs_norm;

  std::vector<double> r(n), p(n), ap(n);
  std::size_t iter = 0;
  for (int restart = 0; restart < 4; ++restart) {
    matvec(std::span<const double>(x.data(), n), std::span<double>(r));
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
    double rr = dot(r, r);
    if (std::sqrt(rr) <= stop) return {iter, std::sqrt(rr) / rhs_norm};

    p.assign(r.begin(), r.end());
    while (std::sqrt(rr) > stop) {
      if (iter >= max_iterations) {
        throw NumericError("cg_solve: no convergence in " +
                           std::to_string(max_iterations) +
                           " iterations (relres=" +
                           std::to_string(std::sqrt(rr) / rhs_norm) + ")");
      }
      matvec(std::span<const double>(p.data(), n), std::span<double>(ap));
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) {
        throw NumericError("cg_solve: operator is not positive definite");
      }
      const double alpha = rr / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      const double rr_next = dot(r, r);
      const double beta = rr_next / rr;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
      rr = rr_next;
      ++iter;
    }
  }

  matvec(std::span<const double>(x.data(), n), std::span<double>(ap));
  double true_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = rhs[i] - ap[i];
    true_norm += d * d;
  }
  const double relres = std::sqrt(true_norm) / rhs_norm;
  if (relres > stop / rhs_norm) {
    throw NumericError("cg_solve: residual stagnated at relres=" +
                       std::to_string(relres));
  }
  return {iter, relres};
}

}  // namespace lpb
