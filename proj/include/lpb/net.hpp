#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lpb/detail/binio.hpp"
#include "lpb/error.hpp"
#include "lpb/heat.hpp"
#include "lpb/rng.hpp"
#include "lpb/tape.hpp"
#include "lpb/tensor.hpp"

namespace lpb::nn {

enum class Activation : std::uint8_t {
  kIdentity = 0,
  kLeakyRelu = 1,
  kTanh = 2,
};

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::kIdentity;
  double act_param = 0.0;  // leaky-relu slope
  Tensor weight;           // [in x out]
  Tensor bias;             // [out]
};

/// Fully connected net: affine + activation per layer, then a final
/// elementwise affine out_scale * h + out_shift on the last activation.
struct DenseNet {
  std::vector<Layer> layers;
  double out_scale = 1.0;
  double out_shift = 0.0;

  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }

  bool all_finite() const {
    for (const Layer& l : layers) {
      if (!l.weight.all_finite() || !l.bias.all_finite()) return false;
    }
    return true;
  }

  /// Single-sample forward pass.
  std::vector<double> forward(std::span<const double> x) const {
    if (x.size() != input_dim()) {
      throw ShapeError("net forward: input has " + std::to_string(x.size()) +
                       " entries, expected " + std::to_string(input_dim()));
    }
    std::vector<double> h(x.begin(), x.end());
    std::vector<double> a;
    for (const Layer& l : layers) {
      a.assign(l.bias.data.begin(), l.bias.data.end());
      affine_into(l, h, a);
      activate(l, a);
      h.swap(a);
    }
    for (double& v : h) v = out_scale * v + out_shift;
    for (double v : h) {
      if (!std::isfinite(v)) throw NumericError("net forward: non-finite output");
    }
    return h;
  }

  /// Vector-Jacobian product: returns cotangent^T * d(forward)/d(input),
  /// i.e. the back-propagated input gradient.
  std::vector<double> vjp(std::span<const double> x,
                          std::span<const double> cotangent) const {
    if (cotangent.size() != output_dim()) {
      throw ShapeError("net vjp: cotangent has " +
                       std::to_string(cotangent.size()) + " entries, expected " +
                       std::to_string(output_dim()));
    }
    // Forward pass storing post-activations per layer.
    std::vector<std::vector<double>> acts;
    acts.reserve(layers.size());
    std::vector<double> h(x.begin(), x.end());
    for (const Layer& l : layers) {
      std::vector<double> a(l.bias.data.begin(), l.bias.data.end());
      affine_into(l, h, a);
      activate(l, a);
      acts.push_back(a);
      h = acts.back();
    }
    std::vector<double> g(cotangent.begin(), cotangent.end());
    for (double& v : g) v *= out_scale;
    for (std::size_t li = layers.size(); li-- > 0;) {
      const Layer& l = layers[li];
      apply_activation_grad(l, acts[li], g);
      // g_prev = W * g
      std::vector<double> gp(l.in, 0.0);
      for (std::size_t i = 0; i < l.in; ++i) {
        const double* wrow = l.weight.data.data() + i * l.out;
        double acc = 0.0;
        for (std::size_t j = 0; j < l.out; ++j) acc += wrow[j] * g[j];
        gp[i] = acc;
      }
      g.swap(gp);
    }
    return g;
  }

  static void affine_into(const Layer& l, std::span<const double> x,
                          std::vector<double>& a) {
    for (std::size_t i = 0; i < l.in; ++i) {
      const double xv = x[i];
      if (xv == 0.0) continue;
      const double* wrow = l.weight.data.data() + i * l.out;
      for (std::size_t j = 0; j < l.out; ++j) a[j] += xv * wrow[j];
    }
  }

  static void activate(const Layer& l, std::vector<double>& a) {
    switch (l.act) {
      case Activation::kIdentity:
        break;
      case Activation::kLeakyRelu:
        for (double& v : a) v = v >= 0.0 ? v : l.act_param * v;
        break;
      case Activation::kTanh:
        for (double& v : a) v = std::tanh(v);
        break;
    }
  }

  // Multiplies g elementwise by the activation derivative, expressed through
  // the post-activation value (valid for identity, leaky-relu, tanh).
  static void apply_activation_grad(const Layer& l,
                                    const std::vector<double>& post,
                                    std::vector<double>& g) {
    switch (l.act) {
      case Activation::kIdentity:
        break;
      case Activation::kLeakyRelu:
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (post[j] < 0.0) g[j] *= l.act_param;
        }
        break;
      case Activation::kTanh:
        for (std::size_t j = 0; j < g.size(); ++j) {
          g[j] *= 1.0 - post[j] * post[j];
        }
        break;
    }
  }
};

/// Node handles for one DenseNet registered on a tape.
struct TapeNet {
  std::vector<ad::NodeId> weights;
  std::vector<ad::NodeId> biases;
};

inline TapeNet register_net(ad::Tape& tape, const DenseNet& net,
                            const std::string& prefix) {
  TapeNet t;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    t.weights.push_back(
        tape.param(prefix + ".w" + std::to_string(i), net.layers[i].weight));
    t.biases.push_back(
        tape.param(prefix + ".b" + std::to_string(i), net.layers[i].bias));
  }
  return t;
}

/// Appends the net's computation to the tape for a [batch x in] input node
/// and returns the [batch x out] output node. Reusing the same TapeNet for
/// several inputs shares parameters (gradients accumulate).
inline ad::NodeId apply_net(ad::Tape& tape, const DenseNet& net,
                            const TapeNet& params, ad::NodeId x) {
  ad::NodeId h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    h = tape.add(tape.matmul(h, params.weights[i]), params.biases[i]);
    switch (l.act) {
      case Activation::kIdentity:
        break;
      case Activation::kLeakyRelu:
        h = tape.leaky_relu(h, l.act_param);
        break;
      case Activation::kTanh:
        h = tape.tanh(h);
        break;
    }
  }
  if (net.out_scale != 1.0) h = tape.scale(h, net.out_scale);
  if (net.out_shift != 0.0) {
    h = tape.add(h, tape.literal(Tensor::scalar(net.out_shift)));
  }
  return h;
}

/// Latent-to-field generator. grid_n == 0 marks a non-grid net (toy
/// problems); otherwise output_dim must equal grid_n^2.
struct GeneratorNet {
  DenseNet net;
  std::size_t grid_n = 0;
  double domain_length = 2.0 * std::numbers::pi;

  std::size_t latent_dim() const { return net.input_dim(); }
  std::size_t output_dim() const { return net.output_dim(); }

  std::vector<double> forward(std::span<const double> z) const {
    return net.forward(z);
  }

  GridField forward_field(std::span<const double> z) const {
    if (grid_n == 0 || grid_n * grid_n != output_dim()) {
      throw ShapeError("generator is not grid-shaped");
    }
    return GridField(grid_n, domain_length, net.forward(z));
  }

  std::vector<double> vjp(std::span<const double> z,
                          std::span<const double> cotangent) const {
    return net.vjp(z, cotangent);
  }
};

/// Scalar-score critic.
struct CriticNet {
  DenseNet net;

  std::size_t input_dim() const { return net.input_dim(); }

  double score(std::span<const double> x) const { return net.forward(x)[0]; }
};

inline Layer make_layer(std::size_t in, std::size_t out, Activation act,
                        double act_param = 0.0) {
  Layer l;
  l.in = in;
  l.out = out;
  l.act = act;
  l.act_param = act_param;
  l.weight = Tensor({in, out});
  l.bias = Tensor({out});
  return l;
}

/// He-style random init; scale 2/fan-in for leaky-relu layers, 1/fan-in
/// otherwise.
inline void init_params(DenseNet& net, Rng& rng) {
  for (Layer& l : net.layers) {
    const double gain = l.act == Activation::kLeakyRelu ? 2.0 : 1.0;
    const double sd = std::sqrt(gain / static_cast<double>(l.in));
    for (double& w : l.weight.data) w = sd * rng.normal();
    for (double& b : l.bias.data) b = 0.0;
  }
}

/// Generator architecture: latent -> 64 -> 256 -> grid^2, leaky-relu hidden
/// activations, tanh output affinely mapped onto [0, 12] temperature units.
inline GeneratorNet make_generator(std::size_t latent_dim, std::size_t grid_n,
                                   double domain_length,
                                   double slope = 0.2) {
  GeneratorNet g;
  g.grid_n = grid_n;
  g.domain_length = domain_length;
  const std::size_t out = grid_n * grid_n;
  g.net.layers.push_back(make_layer(latent_dim, 64, Activation::kLeakyRelu, slope));
  g.net.layers.push_back(make_layer(64, 256, Activation::kLeakyRelu, slope));
  g.net.layers.push_back(make_layer(256, out, Activation::kTanh));
  g.net.out_scale = 6.0;
  g.net.out_shift = 6.0;
  return g;
}

/// Critic architecture: grid^2 -> 256 -> 64 -> 1 with leaky-relu hiddens.
inline CriticNet make_critic(std::size_t input_dim, double slope = 0.2) {
  CriticNet c;
  c.net.layers.push_back(make_layer(input_dim, 256, Activation::kLeakyRelu, slope));
  c.net.layers.push_back(make_layer(256, 64, Activation::kLeakyRelu, slope));
  c.net.layers.push_back(make_layer(64, 1, Activation::kIdentity));
  return c;
}

/// iid standard-normal latent draws.
inline std::vector<std::vector<double>> sample_prior_latent(
    Rng& rng, std::size_t count, std::size_t latent_dim = 8) {
  if (count < 1) throw ConfigError("sample_prior_latent: count must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(rng.normal_vector(latent_dim));
  }
  return out;
}

// GPW1 weights file: magic "GPW1", u16 version (1), architecture descriptor
// (u32 layer count; per layer u32 in, u32 out, u8 activation id,
// f64 activation parameter; f64 out_scale; f64 out_shift), then parameters
// in descriptor order (per layer: weight row-major [in x out], bias) as
// little-endian 64-bit reals.

inline void save_weights(const DenseNet& net, const std::string& path) {
  auto os = detail::open_out(path);
  detail::write_magic(os, "GPW1");
  detail::write_le<std::uint16_t>(os, 1);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const Layer& l : net.layers) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.in));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.out));
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(l.act));
    detail::write_f64(os, l.act_param);
  }
  detail::write_f64(os, net.out_scale);
  detail::write_f64(os, net.out_shift);
  for (const Layer& l : net.layers) {
    for (double v : l.weight.data) detail::write_f64(os, v);
    for (double v : l.bias.data) detail::write_f64(os, v);
  }
  if (!os) throw IoError("write failed: " + path);
}

inline DenseNet load_weights(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "GPW1", path);
  const auto version = detail::read_le<std::uint16_t>(is, "version");
  if (version != 1) {
    throw IoError(path + ": unsupported GPW1 version " + std::to_string(version));
  }
  const auto layer_count = detail::read_le<std::uint32_t>(is, "layer count");
  if (layer_count == 0 || layer_count > 64) {
    throw IoError(path + ": implausible layer count");
  }
  DenseNet net;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const auto in = detail::read_le<std::uint32_t>(is, "layer in dim");
    const auto out = detail::read_le<std::uint32_t>(is, "layer out dim");
    const auto act = detail::read_le<std::uint8_t>(is, "activation id");
    const double act_param = detail::read_f64(is, "activation param");
    if (in == 0 || out == 0 || act > 2) {
      throw IoError(path + ": invalid layer descriptor");
    }
    if (i > 0 && net.layers.back().out != in) {
      throw IoError(path + ": layer dims do not chain");
    }
    net.layers.push_back(
        make_layer(in, out, static_cast<Activation>(act), act_param));
  }
  net.out_scale = detail::read_f64(is, "out_scale");
  net.out_shift = detail::read_f64(is, "out_shift");
  for (Layer& l : net.layers) {
    for (double& v : l.weight.data) v = detail::read_f64(is, "weights");
    for (double& v : l.bias.data) v = detail::read_f64(is, "bias");
  }
  if (!net.all_finite()) throw IoError(path + ": non-finite parameters");
  return net;
}

/// Loads generator weights and validates them against the expected latent
/// dimension and grid.
inline GeneratorNet load_generator(const std::string& path,
                                   std::size_t expected_latent,
                                   std::size_t grid_n, double domain_length) {
  GeneratorNet g;
  g.net = load_weights(path);
  g.grid_n = grid_n;
  g.domain_length = domain_length;
  if (g.latent_dim() != expected_latent || g.output_dim() != grid_n * grid_n) {
    throw IoError(path + ": architecture mismatch (file " +
                  std::to_string(g.latent_dim()) + " -> " +
                  std::to_string(g.output_dim()) + ", context " +
                  std::to_string(expected_latent) + " -> " +
                  std::to_string(grid_n * grid_n) + ")");
  }
  return g;
}

}  // namespace lpb::nn
