#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lpb/bfgs.hpp"
#include "lpb/cg.hpp"
#include "lpb/detail/parallel.hpp"
#include "lpb/error.hpp"
#include "lpb/heat.hpp"
#include "lpb/rng.hpp"
#include "lpb/synthetic.hpp"

namespace lpb {

template <class G>
concept LatentGenerator = requires(const G& g, std::span<const double> v) {
  { g.latent_dim() } -> std::convertible_to<std::size_t>;
  { g.output_dim() } -> std::convertible_to<std::size_t>;
  { g.forward(v) } -> std::same_as<std::vector<double>>;
  { g.vjp(v, v) } -> std::same_as<std::vector<double>>;
};

template <class F>
concept ForwardMap = requires(const F& f, std::span<const double> v) {
  { f.input_dim() } -> std::convertible_to<std::size_t>;
  { f.output_dim() } -> std::convertible_to<std::size_t>;
  { f.apply(v) } -> std::same_as<std::vector<double>>;
  { f.apply_adjoint(v) } -> std::same_as<std::vector<double>>;
};

/// Trivial forward map y = x; used by conjugate-Gaussian reference problems.
struct IdentityMap {
  std::size_t dim = 0;
  std::size_t input_dim() const { return dim; }
  std::size_t output_dim() const { return dim; }
  std::vector<double> apply(std::span<const double> x) const {
    return {x.begin(), x.end()};
  }
  std::vector<double> apply_adjoint(std::span<const double> y) const {
    return {y.begin(), y.end()};
  }
};

/// Posterior over the latent vector z given an observation y_hat, a trained
/// generator g, a forward map f, and iid Gaussian noise of deviation sigma:
/// the unnormalized log density is -r(z)/2 with
///   r(z) = |y_hat - f(g(z))|^2 / sigma^2 + |z|^2.
/// Immutable and shareable across threads.
template <LatentGenerator G, ForwardMap F>
struct LatentPosteriorProblem {
  const G* generator = nullptr;
  const F* forward = nullptr;
  std::vector<double> observed;
  double sigma = 1.0;

  std::size_t latent_dim() const { return generator->latent_dim(); }

  void validate() const {
    if (generator == nullptr || forward == nullptr) {
      throw ConfigError("posterior problem: missing generator or forward map");
    }
    if (generator->output_dim() != forward->input_dim() ||
        forward->output_dim() != observed.size()) {
      throw ShapeError("posterior problem: generator/forward/observation "
                       "dimensions disagree");
    }
    if (!(sigma > 0.0)) {
      throw ConfigError("posterior problem: sigma must be > 0");
    }
  }
};

template <LatentGenerator G, ForwardMap F>
LatentPosteriorProblem<G, F> make_posterior_problem(const G& gen, const F& fwd,
                                                    std::vector<double> observed,
                                                    double sigma) {
  LatentPosteriorProblem<G, F> p{&gen, &fwd, std::move(observed), sigma};
  p.validate();
  return p;
}

/// r(z): data misfit plus latent prior term.
template <LatentGenerator G, ForwardMap F>
double residual_functional(const LatentPosteriorProblem<G, F>& p,
                           std::span<const double> z) {
  const std::vector<double> y = p.forward->apply(p.generator->forward(z));
  double misfit = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = p.observed[i] - y[i];
    misfit += d * d;
  }
  double prior = 0.0;
  for (double v : z) prior += v * v;
  const double r = misfit / (p.sigma * p.sigma) + prior;
  if (!std::isfinite(r)) {
    throw NumericError("residual functional is non-finite");
  }
  return r;
}

/// Unnormalized log posterior density, -r(z)/2.
template <LatentGenerator G, ForwardMap F>
double log_unnormalized_posterior(const LatentPosteriorProblem<G, F>& p,
                                  std::span<const double> z) {
  return -0.5 * residual_functional(p, z);
}

/// Gradient of r(z)/2: adjoint of the forward map composed with the
/// generator vector-Jacobian product on the weighted residual, plus z.
template <LatentGenerator G, ForwardMap F>
std::vector<double> map_gradient(const LatentPosteriorProblem<G, F>& p,
                                 std::span<const double> z) {
  const std::vector<double> x = p.generator->forward(z);
  std::vector<double> residual = p.forward->apply(x);
  const double inv_var = 1.0 / (p.sigma * p.sigma);
  for (std::size_t i = 0; i < residual.size(); ++i) {
    residual[i] = (residual[i] - p.observed[i]) * inv_var;
  }
  const std::vector<double> back = p.forward->apply_adjoint(residual);
  std::vector<double> grad = p.generator->vjp(z, back);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += z[i];
  for (double v : grad) {
    if (!std::isfinite(v)) throw NumericError("posterior gradient non-finite");
  }
  return grad;
}

struct RestartRecord {
  std::vector<double> initial_z;
  std::vector<double> final_z;
  double r_value = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct MapResult {
  std::vector<double> z_map;
  double r_value = 0.0;          // r(z_map), full functional
  std::vector<double> output;    // g(z_map)
  std::vector<RestartRecord> restarts;
  std::size_t winner = 0;
  bool no_restart_converged = false;
};

struct MapOptions {
  std::size_t restarts = 32;
  std::uint64_t seed = 0;
  BfgsOptions bfgs;
};

/// Multi-restart quasi-Newton MAP estimate of the latent posterior: each
/// restart descends r(z)/2 from a fresh prior draw; the reported z_map is
/// the restart with the smallest final r. Restarts run in parallel (capped
/// by LPB_THREADS) with per-restart rng streams, so the result does not
/// depend on thread count.
template <LatentGenerator G, ForwardMap F>
MapResult latent_map(const LatentPosteriorProblem<G, F>& p,
                     const MapOptions& opt) {
  p.validate();
  if (opt.restarts < 1) throw ConfigError("latent_map: restarts must be >= 1");
  const std::size_t m = p.latent_dim();
  Rng master(opt.seed);

  MapResult result;
  result.restarts.resize(opt.restarts);
  detail::parallel_for_index(opt.restarts, [&](std::size_t i) {
    Rng stream = master.stream(i);
    std::vector<double> z0 = stream.normal_vector(m);
    auto objective = [&p](std::span<const double> z, std::span<double> grad) {
      const std::vector<double> g = map_gradient(p, z);
      std::copy(g.begin(), g.end(), grad.begin());
      return 0.5 * residual_functional(p, z);
    };
    RestartRecord& rec = result.restarts[i];
    rec.initial_z = z0;
    BfgsResult br = bfgs_minimize(objective, std::move(z0), opt.bfgs);
    rec.final_z = std::move(br.x);
    rec.r_value = 2.0 * br.value;
    rec.gradient_norm = br.gradient_norm;
    rec.iterations = br.iterations;
    rec.converged = br.converged;
  });

  std::size_t best = 0;
  bool any_converged = false;
  for (std::size_t i = 0; i < result.restarts.size(); ++i) {
    any_converged = any_converged || result.restarts[i].converged;
    if (result.restarts[i].r_value < result.restarts[best].r_value) best = i;
  }
  result.winner = best;
  result.z_map = result.restarts[best].final_z;
  result.r_value = result.restarts[best].r_value;
  result.output = p.generator->forward(result.z_map);
  result.no_restart_converged = !any_converged;
  return result;
}

enum class EstimatorKind : std::uint8_t { kMonteCarlo, kMcmc };

struct PosteriorSummary {
  EstimatorKind estimator = EstimatorKind::kMonteCarlo;
  std::size_t sample_count = 0;
  std::vector<double> mean;
  std::vector<double> std_dev;    // population convention (divide by N)
  std::vector<double> map_field;  // g(z) at the best retained sample
  std::vector<double> map_z;
  std::vector<double> mean_se;    // per-component standard error of the mean
  double ess = 0.0;               // effective sample size (MC only)
  double acceptance_rate = 0.0;   // MCMC only
};

namespace detail_mc {

// Accumulators for self-normalized importance sums, kept stable by tracking
// the running maximum log-weight m and storing sums of exp(lw - m) terms.
struct Accumulator {
  double max_lw = -std::numeric_limits<double>::infinity();
  double w1 = 0.0, w2 = 0.0;
  std::vector<double> sx, sxx, tx, txx;  // w*x, w*x^2, w^2*x, w^2*x^2
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> best_z, best_x;
  std::size_t count = 0;

  void init(std::size_t dim) {
    sx.assign(dim, 0.0);
    sxx.assign(dim, 0.0);
    tx.assign(dim, 0.0);
    txx.assign(dim, 0.0);
  }

  void rescale(double new_max) {
    const double f = std::exp(max_lw - new_max);
    const double f2 = f * f;
    w1 *= f;
    w2 *= f2;
    for (double& v : sx) v *= f;
    for (double& v : sxx) v *= f;
    for (double& v : tx) v *= f2;
    for (double& v : txx) v *= f2;
    max_lw = new_max;
  }

  void add(double lw, std::span<const double> x, std::span<const double> z,
           double posterior_score) {
    ++count;
    if (lw > max_lw) rescale(lw);
    const double w = std::exp(lw - max_lw);
    const double ww = w * w;
    w1 += w;
    w2 += ww;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double v = x[j];
      sx[j] += w * v;
      sxx[j] += w * v * v;
      tx[j] += ww * v;
      txx[j] += ww * v * v;
    }
    if (posterior_score > best_score) {
      best_score = posterior_score;
      best_z.assign(z.begin(), z.end());
      best_x.assign(x.begin(), x.end());
    }
  }

  // Merge `other` into this; callers merge in fixed chunk order.
  void merge(const Accumulator& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    Accumulator o = other;
    if (o.max_lw > max_lw) {
      rescale(o.max_lw);
    } else {
      o.rescale(max_lw);
    }
    w1 += o.w1;
    w2 += o.w2;
    for (std::size_t j = 0; j < sx.size(); ++j) {
      sx[j] += o.sx[j];
      sxx[j] += o.sxx[j];
      tx[j] += o.tx[j];
      txx[j] += o.txx[j];
    }
    count += o.count;
    if (o.best_score > best_score) {
      best_score = o.best_score;
      best_z = o.best_z;
      best_x = o.best_x;
    }
  }
};

}  // namespace detail_mc

/// Self-normalized Monte-Carlo posterior summary from prior samples weighted
/// by the likelihood. Log-domain weights cannot underflow as a group; if
/// every log-weight is -inf the estimate is undefined and a NumericError
/// suggests MCMC instead. Samples draw from per-chunk rng streams and merge
/// in chunk order, so results are identical for any LPB_THREADS.
template <LatentGenerator G, ForwardMap F>
PosteriorSummary mc_estimate(const LatentPosteriorProblem<G, F>& p,
                             std::size_t n_samples, std::uint64_t seed) {
  p.validate();
  if (n_samples < 1) throw ConfigError("mc_estimate: need at least 1 sample");
  const std::size_t dim = p.generator->output_dim();
  const std::size_t m = p.latent_dim();
  const double inv_two_var = 0.5 / (p.sigma * p.sigma);

  constexpr std::size_t kChunk = 4096;
  const std::size_t chunk_count = (n_samples + kChunk - 1) / kChunk;
  std::vector<detail_mc::Accumulator> partial(chunk_count);
  Rng master(seed);

  detail::parallel_for_index(chunk_count, [&](std::size_t c) {
    detail_mc::Accumulator& acc = partial[c];
    acc.init(dim);
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(n_samples, begin + kChunk);
    for (std::size_t i = begin; i < end; ++i) {
      Rng stream = master.stream(i);
      const std::vector<double> z = stream.normal_vector(m);
      const std::vector<double> x = p.generator->forward(z);
      const std::vector<double> y = p.forward->apply(x);
      double misfit = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) {
        const double d = p.observed[j] - y[j];
        misfit += d * d;
      }
      const double lw = -misfit * inv_two_var;
      double prior = 0.0;
      for (double v : z) prior += v * v;
      acc.add(lw, x, z, lw - 0.5 * prior);
    }
  });

  detail_mc::Accumulator total;
  total.init(dim);
  for (const auto& acc : partial) total.merge(acc);

  if (!(total.w1 > 0.0) || !std::isfinite(total.w1)) {
    throw NumericError(
        "mc_estimate: all likelihood weights vanished; the posterior is too "
        "concentrated for prior sampling, use mh_chain instead");
  }

  PosteriorSummary s;
  s.estimator = EstimatorKind::kMonteCarlo;
  s.sample_count = total.count;
  s.mean.resize(dim);
  s.std_dev.resize(dim);
  s.mean_se.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const double mu = total.sx[j] / total.w1;
    s.mean[j] = mu;
    const double var = std::max(0.0, total.sxx[j] / total.w1 - mu * mu);
    s.std_dev[j] = std::sqrt(var);
    const double se2 =
        total.txx[j] - 2.0 * mu * total.tx[j] + mu * mu * total.w2;
    s.mean_se[j] = std::sqrt(std::max(0.0, se2)) / total.w1;
  }
  s.map_field = total.best_x;
  s.map_z = total.best_z;
  s.ess = total.w1 * total.w1 / total.w2;
  return s;
}

struct ChainConfig {
  double proposal_std = 0.005;
  std::size_t length = 200000;
  std::size_t burn_in = 50000;
  std::size_t thinning = 10;
  std::vector<double> initial_z;  // empty: draw from the latent prior
  std::uint64_t seed = 0;

  void validate() const {
    if (proposal_std < 0.0) throw ConfigError("chain: proposal std must be >= 0");
    if (length == 0) throw ConfigError("chain: length must be > 0");
    if (burn_in >= length) throw ConfigError("chain: burn-in must be < length");
    if (thinning == 0) throw ConfigError("chain: thinning must be >= 1");
  }
};

struct ChainResult {
  std::vector<std::vector<double>> samples;  // retained latent vectors
  std::vector<double> log_densities;         // -r/2 at each retained sample
  double acceptance_rate = 0.0;
  std::size_t total_steps = 0;
};

/// Random-walk Metropolis-Hastings on the latent posterior with an isotropic
/// Gaussian proposal. All acceptance arithmetic is in the log domain, so
/// likelihoods below double range still give finite decisions.
template <LatentGenerator G, ForwardMap F>
ChainResult mh_chain(const LatentPosteriorProblem<G, F>& p,
                     const ChainConfig& cfg) {
  p.validate();
  cfg.validate();
  const std::size_t m = p.latent_dim();
  if (!cfg.initial_z.empty() && cfg.initial_z.size() != m) {
    throw ShapeError("chain: initial z has wrong dimension");
  }
  Rng rng(cfg.seed);
  std::vector<double> z =
      cfg.initial_z.empty() ? rng.normal_vector(m) : cfg.initial_z;
  double lp = log_unnormalized_posterior(p, z);

  ChainResult result;
  result.total_steps = cfg.length;
  const std::size_t retained =
      (cfg.length - cfg.burn_in + cfg.thinning - 1) / cfg.thinning;
  result.samples.reserve(retained);
  result.log_densities.reserve(retained);

  std::vector<double> proposal(m);
  std::size_t accepted = 0;
  for (std::size_t step = 1; step <= cfg.length; ++step) {
    for (std::size_t j = 0; j < m; ++j) {
      proposal[j] = z[j] + cfg.proposal_std * rng.normal();
    }
    const double lp_new = log_unnormalized_posterior(p, proposal);
    const double log_alpha = lp_new - lp;
    bool accept = log_alpha >= 0.0;
    if (!accept) {
      accept = std::log(rng.uniform01()) < log_alpha;
    }
    if (accept) {
      z = proposal;
      lp = lp_new;
      ++accepted;
    }
    if (step > cfg.burn_in && (step - cfg.burn_in - 1) % cfg.thinning == 0) {
      result.samples.push_back(z);
      result.log_densities.push_back(lp);
    }
  }
  result.acceptance_rate =
      static_cast<double>(accepted) / static_cast<double>(cfg.length);
  return result;
}

/// Pointwise mean/std and the maximum-density sample of a chain, pushed
/// through the generator. Standard errors of the mean come from batch means
/// (sqrt(N) batches), which absorbs autocorrelation.
template <LatentGenerator G, ForwardMap F>
PosteriorSummary summarize_chain(const LatentPosteriorProblem<G, F>& p,
                                 const ChainResult& chain) {
  p.validate();
  const std::size_t n = chain.samples.size();
  if (n == 0) throw ConfigError("summarize_chain: empty chain");
  const std::size_t dim = p.generator->output_dim();

  PosteriorSummary s;
  s.estimator = EstimatorKind::kMcmc;
  s.sample_count = n;
  s.acceptance_rate = chain.acceptance_rate;

  std::vector<double> sum(dim, 0.0), sumsq(dim, 0.0);
  const std::size_t batches = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
  const std::size_t batch_len = n / batches;
  std::vector<std::vector<double>> batch_mean;
  std::vector<double> batch_acc(dim, 0.0);

  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (chain.log_densities[i] > chain.log_densities[best]) best = i;
    const std::vector<double> x = p.generator->forward(chain.samples[i]);
    for (std::size_t j = 0; j < dim; ++j) {
      sum[j] += x[j];
      sumsq[j] += x[j] * x[j];
      batch_acc[j] += x[j];
    }
    if (batch_len > 0 && (i + 1) % batch_len == 0 &&
        batch_mean.size() + 1 <= batches) {
      for (double& v : batch_acc) v /= static_cast<double>(batch_len);
      batch_mean.push_back(batch_acc);
      batch_acc.assign(dim, 0.0);
    }
  }

  s.mean.resize(dim);
  s.std_dev.resize(dim);
  s.mean_se.assign(dim, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < dim; ++j) {
    const double mu = sum[j] * inv_n;
    s.mean[j] = mu;
    s.std_dev[j] = std::sqrt(std::max(0.0, sumsq[j] * inv_n - mu * mu));
  }
  if (batch_mean.size() >= 2) {
    const double b = static_cast<double>(batch_mean.size());
    for (std::size_t j = 0; j < dim; ++j) {
      double mb = 0.0;
      for (const auto& bm : batch_mean) mb += bm[j];
      mb /= b;
      double var = 0.0;
      for (const auto& bm : batch_mean) {
        var += (bm[j] - mb) * (bm[j] - mb);
      }
      var /= (b - 1.0);
      s.mean_se[j] = std::sqrt(var / b);
    }
  }
  s.map_z = chain.samples[best];
  s.map_field = p.generator->forward(s.map_z);
  return s;
}

enum class PriorKind : std::uint8_t { kL2, kH1 };

/// Classical MAP baseline in image space: solves
///   (A^T A / sigma^2 + P) x = A^T y_hat / sigma^2
/// with P = alpha I (L2) or alpha (-Laplacian_h) + 1e-8 alpha I (H1) by
/// conjugate gradient to relative residual 1e-10.
inline GridField classical_map(const ForwardOperator& op,
                               const GridField& observed,
                               const NoiseModel& noise, PriorKind prior,
                               double alpha, double rel_tol = 1e-10) {
  if (!(alpha > 0.0)) throw ConfigError("classical_map: alpha must be > 0");
  noise.validate();
  if (observed.n != op.grid_n()) {
    throw ShapeError("classical_map: observation grid mismatch");
  }
  const std::size_t dim = op.input_dim();
  const std::size_t n = op.grid_n();
  const double h = op.spacing();
  const double inv_var = 1.0 / (noise.sigma * noise.sigma);
  const double eps = 1e-8 * alpha;

  std::vector<double> lap(dim);
  auto matvec = [&](std::span<const double> v, std::span<double> out) {
    const std::vector<double> atav = op.apply_adjoint(op.apply(v));
    if (prior == PriorKind::kL2) {
      for (std::size_t i = 0; i < dim; ++i) {
        out[i] = atav[i] * inv_var + alpha * v[i];
      }
    } else {
      negative_laplacian(v, lap, n, h);
      for (std::size_t i = 0; i < dim; ++i) {
        out[i] = atav[i] * inv_var + alpha * lap[i] + eps * v[i];
      }
    }
  };
  std::vector<double> rhs = op.apply_adjoint(observed.values);
  for (double& v : rhs) v *= inv_var;

  GridField x(n, observed.length);
  cg_solve(matvec, rhs, std::span<double>(x.values), rel_tol, 50 * dim + 2000);
  return x;
}

}  // namespace lpb
