#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lpb/detail/matrix.hpp"
#include "lpb/error.hpp"
#include "lpb/net.hpp"
#include "lpb/rng.hpp"
#include "lpb/synthetic.hpp"
#include "lpb/tape.hpp"

namespace lpb::nn {

enum class PenaltyMode : std::uint8_t {
  kGradientPenalty,
  kWeightClip,
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;  // values as published; swap_betas selects the
  double beta2 = 0.5;  // conventional (0.5, 0.9) ordering instead
  bool swap_betas = false;
  double adam_eps = 1e-8;
  std::size_t batch_size = 64;
  std::size_t critic_steps = 5;
  double penalty_weight = 10.0;
  std::size_t iterations = 3000;
  PenaltyMode penalty_mode = PenaltyMode::kGradientPenalty;
  double clip_bound = 0.01;
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  // 0 = no checkpoints
  std::size_t log_every = 1;

  void validate() const {
    if (learning_rate < 0.0) throw ConfigError("train: learning rate must be >= 0");
    if (batch_size < 2) throw ConfigError("train: batch size must be >= 2");
    if (critic_steps < 1) throw ConfigError("train: critic steps must be >= 1");
    if (penalty_weight < 0.0) throw ConfigError("train: penalty weight must be >= 0");
    if (clip_bound <= 0.0 && penalty_mode == PenaltyMode::kWeightClip) {
      throw ConfigError("train: clip bound must be > 0");
    }
  }

  double effective_beta1() const { return swap_betas ? beta2 : beta1; }
  double effective_beta2() const { return swap_betas ? beta1 : beta2; }
};

struct TrainLogEntry {
  std::size_t iteration = 0;
  double critic_loss = 0.0;  // mean d(fake) - mean d(real) + penalty
  double penalty = 0.0;
  double gen_loss = 0.0;     // -mean d(g(z))
};

using TrainLog = std::vector<TrainLogEntry>;

using CheckpointHook =
    std::function<void(std::size_t, const GeneratorNet&, const CriticNet&)>;

struct AdamState {
  std::vector<double> m, v;
  std::size_t t = 0;
};

inline void adam_step(Tensor& param, std::span<const double> grad,
                      AdamState& st, double lr, double beta1, double beta2,
                      double eps) {
  if (st.m.empty()) {
    st.m.assign(param.size(), 0.0);
    st.v.assign(param.size(), 0.0);
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

/// Per-sample critic input gradients for a [batch x dim] row block:
/// grad[i, :] = d score / d x at row i. Also reports the scores and keeps the
/// masked backprop intermediates needed by the penalty double-backward.
struct CriticGradWork {
  std::vector<std::vector<double>> post;  // post-activations per layer
  std::vector<std::vector<double>> t;     // mask-scaled cotangents per layer
  std::vector<double> scores;
  std::vector<double> input_grad;  // [batch x dim]
};

inline void critic_input_gradients(const DenseNet& critic,
                                   std::span<const double> x,
                                   std::size_t batch, CriticGradWork& work) {
  const std::size_t layer_count = critic.layers.size();
  work.post.resize(layer_count);
  work.t.resize(layer_count);

  // Forward, storing post-activations.
  const double* h = x.data();
  std::size_t hdim = critic.input_dim();
  for (std::size_t li = 0; li < layer_count; ++li) {
    const Layer& l = critic.layers[li];
    std::vector<double>& a = work.post[li];
    a.assign(batch * l.out, 0.0);
    detail::matmul(a.data(), h, l.weight.data.data(), batch, l.in, l.out);
    for (std::size_t r = 0; r < batch; ++r) {
      double* row = a.data() + r * l.out;
      for (std::size_t j = 0; j < l.out; ++j) row[j] += l.bias.data[j];
    }
    DenseNet::activate(l, a);
    h = a.data();
    hdim = l.out;
  }
  if (hdim != 1) throw ShapeError("critic must produce a scalar score");
  work.scores.assign(batch, 0.0);
  for (std::size_t r = 0; r < batch; ++r) {
    work.scores[r] = critic.out_scale * work.post.back()[r] + critic.out_shift;
  }

  // Backward to the input with per-sample seed 1 on each score.
  std::vector<double> u(batch, critic.out_scale);
  for (std::size_t li = layer_count; li-- > 0;) {
    const Layer& l = critic.layers[li];
    // T_l = U ⊙ activation'(A_l), expressed through post-activations.
    std::vector<double>& t = work.t[li];
    t = u;
    const std::vector<double>& post = work.post[li];
    switch (l.act) {
      case Activation::kIdentity:
        break;
      case Activation::kLeakyRelu:
        for (std::size_t i = 0; i < t.size(); ++i) {
          if (post[i] < 0.0) t[i] *= l.act_param;
        }
        break;
      case Activation::kTanh:
        for (std::size_t i = 0; i < t.size(); ++i) {
          t[i] *= 1.0 - post[i] * post[i];
        }
        break;
    }
    // U_prev = T_l * W_l^T
    u.assign(batch * l.in, 0.0);
    detail::matmul_nt_acc(u.data(), t.data(), l.weight.data.data(), batch,
                          l.out, l.in);
  }
  work.input_grad = std::move(u);
}

/// Gradient-penalty value lambda * mean((|grad_x d(x_hat)| - 1)^2) over the
/// rows of x_hat, with its parameter gradient accumulated into
/// weight_grads[layer]. The critic is piecewise linear, so holding the
/// activation masks fixed makes the double-backward exact almost everywhere;
/// bias gradients of the penalty vanish for the same reason.
inline double gradient_penalty_accumulate(
    const DenseNet& critic, std::span<const double> x_hat, std::size_t batch,
    double weight, std::vector<std::vector<double>>& weight_grads) {
  for (const Layer& l : critic.layers) {
    if (l.act == Activation::kTanh) {
      throw ConfigError(
          "gradient penalty double-backward requires a piecewise-linear "
          "critic (identity / leaky-relu activations)");
    }
  }
  CriticGradWork work;
  critic_input_gradients(critic, x_hat, batch, work);

  const std::size_t dim = critic.input_dim();
  double value = 0.0;
  // Cotangent on the input gradient rows.
  std::vector<double> c(batch * dim, 0.0);
  const double scale = weight * 2.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* g = work.input_grad.data() + r * dim;
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) s += g[j] * g[j];
    s = std::sqrt(s);
    const double d = s - 1.0;
    value += d * d;
    if (s > 0.0) {
      const double f = scale * d / s;
      double* crow = c.data() + r * dim;
      for (std::size_t j = 0; j < dim; ++j) crow[j] = f * g[j];
    }
  }
  value *= weight / static_cast<double>(batch);

  // Reverse pass through the (mask-frozen) backprop graph, walking layers
  // front to back: dW_l += C_{l-1}^T T_l, C_l = (C_{l-1} W_l) ⊙ M_l.
  std::vector<double> cl = std::move(c);
  for (std::size_t li = 0; li < critic.layers.size(); ++li) {
    const Layer& l = critic.layers[li];
    detail::matmul_tn_acc(weight_grads[li].data(), cl.data(),
                          work.t[li].data(), batch, l.in, l.out);
    std::vector<double> next(batch * l.out, 0.0);
    detail::matmul(next.data(), cl.data(), l.weight.data.data(), batch, l.in,
                   l.out);
    const std::vector<double>& post = work.post[li];
    if (l.act == Activation::kLeakyRelu) {
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (post[i] < 0.0) next[i] *= l.act_param;
      }
    }
    cl = std::move(next);
  }
  return value;
}

/// Wasserstein-GAN training: `critic_steps` critic updates per generator
/// update, Adam on both nets, gradient-penalty or weight-clip Lipschitz
/// control. Deterministic given (seed, config, dataset). Throws NumericError
/// naming the iteration if a loss goes non-finite.
inline TrainLog wgan_train(const Dataset& dataset, GeneratorNet& gen,
                           CriticNet& critic, const TrainConfig& cfg,
                           const CheckpointHook& checkpoint = {}) {
  cfg.validate();
  if (dataset.fields.empty()) throw ConfigError("train: empty dataset");
  const std::size_t dim = gen.output_dim();
  if (dataset.n * dataset.n != dim || critic.input_dim() != dim) {
    throw ShapeError("train: dataset/generator/critic dimensions disagree");
  }
  const std::size_t batch = cfg.batch_size;
  const std::size_t latent = gen.latent_dim();
  const double b1 = cfg.effective_beta1();
  const double b2 = cfg.effective_beta2();

  Rng rng(cfg.seed);

  // Critic tape: scores on bound real/fake batches.
  Tensor x_real({batch, dim}), x_fake({batch, dim});
  ad::Tape ctape;
  ad::NodeId xr = ctape.input("x_real", {batch, dim});
  ad::NodeId xf = ctape.input("x_fake", {batch, dim});
  TapeNet cparams = register_net(ctape, critic.net, "critic");
  ad::NodeId d_real = apply_net(ctape, critic.net, cparams, xr);
  ad::NodeId d_fake = apply_net(ctape, critic.net, cparams, xf);
  ad::NodeId c_loss =
      ctape.add(ctape.mean(d_fake), ctape.scale(ctape.mean(d_real), -1.0));
  ctape.mark_output(c_loss);
  ctape.bind("x_real", x_real);
  ctape.bind("x_fake", x_fake);

  // Generator tape: -mean d(g(z)). Critic parameters participate but only
  // generator parameters are updated from it.
  Tensor z_batch({batch, latent});
  ad::Tape gtape;
  ad::NodeId zb = gtape.input("z", {batch, latent});
  TapeNet gparams = register_net(gtape, gen.net, "gen");
  ad::NodeId fake = apply_net(gtape, gen.net, gparams, zb);
  TapeNet cparams_g = register_net(gtape, critic.net, "critic");
  ad::NodeId g_loss =
      gtape.scale(gtape.mean(apply_net(gtape, critic.net, cparams_g, fake)), -1.0);
  gtape.mark_output(g_loss);
  gtape.bind("z", z_batch);

  const Tensor one = Tensor::scalar(1.0);
  const std::size_t layer_count = critic.net.layers.size();
  std::vector<AdamState> critic_w_state(layer_count), critic_b_state(layer_count);
  std::vector<AdamState> gen_w_state(gen.net.layers.size()),
      gen_b_state(gen.net.layers.size());
  std::vector<std::vector<double>> wgrads(layer_count);
  std::vector<double> x_hat(batch * dim);

  TrainLog log;
  log.reserve(cfg.iterations);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    double critic_loss = 0.0, penalty = 0.0;
    try {
      for (std::size_t cs = 0; cs < cfg.critic_steps; ++cs) {
        // Real rows.
        for (std::size_t r = 0; r < batch; ++r) {
          const std::size_t idx = rng.uniform_index(dataset.fields.size());
          const std::vector<double>& src = dataset.fields[idx].values;
          std::copy(src.begin(), src.end(), x_real.data.begin() + r * dim);
        }
        // Fake rows.
        std::vector<double> z(latent);
        for (std::size_t r = 0; r < batch; ++r) {
          for (double& v : z) v = rng.normal();
          const std::vector<double> out = gen.net.forward(z);
          std::copy(out.begin(), out.end(), x_fake.data.begin() + r * dim);
        }
        ctape.forward();
        ctape.backward(one);
        for (std::size_t li = 0; li < layer_count; ++li) {
          const Tensor& wg = ctape.gradient(cparams.weights[li]);
          wgrads[li].assign(wg.data.begin(), wg.data.end());
        }
        penalty = 0.0;
        if (cfg.penalty_mode == PenaltyMode::kGradientPenalty) {
          for (std::size_t r = 0; r < batch; ++r) {
            const double eps = rng.uniform01();
            const double* real_row = x_real.data.data() + r * dim;
            const double* fake_row = x_fake.data.data() + r * dim;
            double* hat_row = x_hat.data() + r * dim;
            for (std::size_t j = 0; j < dim; ++j) {
              hat_row[j] = eps * real_row[j] + (1.0 - eps) * fake_row[j];
            }
          }
          penalty = gradient_penalty_accumulate(
              critic.net, x_hat, batch, cfg.penalty_weight, wgrads);
        }
        critic_loss = ctape.value(c_loss)[0] + penalty;
        if (!std::isfinite(critic_loss)) {
          throw NumericError("non-finite critic loss");
        }
        for (std::size_t li = 0; li < layer_count; ++li) {
          adam_step(critic.net.layers[li].weight, wgrads[li],
                    critic_w_state[li], cfg.learning_rate, b1, b2, cfg.adam_eps);
          adam_step(critic.net.layers[li].bias,
                    ctape.gradient(cparams.biases[li]).data,
                    critic_b_state[li], cfg.learning_rate, b1, b2, cfg.adam_eps);
        }
        if (cfg.penalty_mode == PenaltyMode::kWeightClip) {
          for (Layer& l : critic.net.layers) {
            for (double& w : l.weight.data) {
              w = std::clamp(w, -cfg.clip_bound, cfg.clip_bound);
            }
            for (double& b : l.bias.data) {
              b = std::clamp(b, -cfg.clip_bound, cfg.clip_bound);
            }
          }
        }
      }

      // Generator update.
      for (double& v : z_batch.data) v = rng.normal();
      gtape.forward();
      gtape.backward(one);
      const double gen_loss = gtape.value(g_loss)[0];
      if (!std::isfinite(gen_loss)) throw NumericError("non-finite generator loss");
      for (std::size_t li = 0; li < gen.net.layers.size(); ++li) {
        adam_step(gen.net.layers[li].weight,
                  gtape.gradient(gparams.weights[li]).data, gen_w_state[li],
                  cfg.learning_rate, b1, b2, cfg.adam_eps);
        adam_step(gen.net.layers[li].bias,
                  gtape.gradient(gparams.biases[li]).data, gen_b_state[li],
                  cfg.learning_rate, b1, b2, cfg.adam_eps);
      }

      if (cfg.log_every == 1 || it % cfg.log_every == 0 || it == cfg.iterations) {
        log.push_back({it, critic_loss, penalty, gen_loss});
      }
      if (checkpoint && cfg.checkpoint_interval > 0 &&
          (it % cfg.checkpoint_interval == 0 || it == cfg.iterations)) {
        checkpoint(it, gen, critic);
      }
    } catch (const NumericError& e) {
      throw NumericError("training aborted at iteration " + std::to_string(it) +
                         ": " + e.what());
    }
  }
  return log;
}

}  // namespace lpb::nn
