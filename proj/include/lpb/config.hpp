#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lpb/csv.hpp"
#include "lpb/error.hpp"
#include "lpb/heat.hpp"
#include "lpb/posterior.hpp"
#include "lpb/wgan.hpp"

namespace lpb {

/// Full experiment description, read from a sectioned key-value text file.
/// Unknown sections or keys are rejected.
struct RunConfig {
  HeatOpConfig grid;  // defaults n=32, length=2*pi, kappa=0.64, dt=0.01, steps=100

  struct Data {
    std::size_t count = 5000;
    std::uint64_t seed = 1;
    double sigma = 1.0;
    bool target_paper = true;  // centered square target vs random patch
    bool record_params = true;
  } data;

  nn::TrainConfig train;
  std::size_t latent_dim = 8;

  struct Inference {
    double proposal_std = 0.005;
    std::size_t chain_length = 200000;
    std::size_t burn_in = 50000;
    std::size_t thinning = 10;
    std::size_t restarts = 32;
    std::size_t samples = 200000;
    double sigma = 1.0;
    std::uint64_t seed = 3;
    double gradient_tol = 1e-8;
    std::size_t max_iterations = 500;
  } inference;

  struct Baseline {
    double alpha = 0.01;
    double alpha_min = 1e-4;
    double alpha_max = 1e2;
    std::size_t alpha_points = 10;
  } baseline;

  std::string out_dir = "out";

  void validate() const {
    grid.validate();
    if (data.count < 1) throw ConfigError("data.count must be >= 1");
    if (!(data.sigma > 0.0)) throw ConfigError("data.sigma must be > 0");
    train.validate();
    if (latent_dim < 1) throw ConfigError("train.latent_dim must be >= 1");
    if (inference.burn_in >= inference.chain_length) {
      throw ConfigError("inference.burn_in must be < chain_length");
    }
    if (inference.thinning < 1) throw ConfigError("inference.thinning must be >= 1");
    if (inference.restarts < 1) throw ConfigError("inference.restarts must be >= 1");
    if (inference.samples < 1) throw ConfigError("inference.samples must be >= 1");
    if (!(inference.sigma > 0.0)) throw ConfigError("inference.sigma must be > 0");
    if (!(baseline.alpha > 0.0)) throw ConfigError("baseline.alpha must be > 0");
    if (baseline.alpha_points < 1) throw ConfigError("baseline.alpha_points must be >= 1");
    if (!(baseline.alpha_min > 0.0) || baseline.alpha_max < baseline.alpha_min) {
      throw ConfigError("baseline alpha grid must satisfy 0 < min <= max");
    }
    if (out_dir.empty()) throw ConfigError("output.dir must not be empty");
  }
};

namespace detail_config {

inline double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a real number, got '" + v + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"grid.n", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.grid.n = parse_u64(v, k); }},
      {"grid.length", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.grid.length = parse_double(v, k); }},
      {"grid.kappa", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.grid.kappa = parse_double(v, k); }},
      {"grid.dt", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.grid.dt = parse_double(v, k); }},
      {"grid.steps", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.grid.steps = parse_u64(v, k); }},
      {"data.count", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.data.count = parse_u64(v, k); }},
      {"data.seed", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.data.seed = parse_u64(v, k); }},
      {"data.sigma", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.data.sigma = parse_double(v, k); }},
      {"data.target", [](RunConfig& c, const std::string& v, const std::string& k) {
         if (v == "paper") c.data.target_paper = true;
         else if (v == "random") c.data.target_paper = false;
         else throw ConfigError("config: '" + k + "' expects paper|random"); }},
      {"data.record_params", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.data.record_params = parse_bool(v, k); }},
      {"train.latent_dim", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.latent_dim = parse_u64(v, k); }},
      {"train.iterations", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.iterations = parse_u64(v, k); }},
      {"train.batch", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.batch_size = parse_u64(v, k); }},
      {"train.critic_steps", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.critic_steps = parse_u64(v, k); }},
      {"train.penalty_mode", [](RunConfig& c, const std::string& v, const std::string& k) {
         if (v == "gradient-penalty") c.train.penalty_mode = nn::PenaltyMode::kGradientPenalty;
         else if (v == "weight-clip") c.train.penalty_mode = nn::PenaltyMode::kWeightClip;
         else throw ConfigError("config: '" + k + "' expects gradient-penalty|weight-clip"); }},
      {"train.penalty_weight", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.penalty_weight = parse_double(v, k); }},
      {"train.clip", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.clip_bound = parse_double(v, k); }},
      {"train.lr", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.learning_rate = parse_double(v, k); }},
      {"train.beta1", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.beta1 = parse_double(v, k); }},
      {"train.beta2", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.beta2 = parse_double(v, k); }},
      {"train.swap_betas", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.swap_betas = parse_bool(v, k); }},
      {"train.adam_eps", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.adam_eps = parse_double(v, k); }},
      {"train.seed", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.seed = parse_u64(v, k); }},
      {"train.checkpoint_interval", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.checkpoint_interval = parse_u64(v, k); }},
      {"train.log_every", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.train.log_every = parse_u64(v, k); }},
      {"inference.proposal_std", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.proposal_std = parse_double(v, k); }},
      {"inference.chain_length", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.chain_length = parse_u64(v, k); }},
      {"inference.burn_in", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.burn_in = parse_u64(v, k); }},
      {"inference.thinning", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.thinning = parse_u64(v, k); }},
      {"inference.restarts", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.restarts = parse_u64(v, k); }},
      {"inference.samples", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.samples = parse_u64(v, k); }},
      {"inference.sigma", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.sigma = parse_double(v, k); }},
      {"inference.seed", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.seed = parse_u64(v, k); }},
      {"inference.gradient_tol", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.gradient_tol = parse_double(v, k); }},
      {"inference.max_iterations", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.inference.max_iterations = parse_u64(v, k); }},
      {"baseline.alpha", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.baseline.alpha = parse_double(v, k); }},
      {"baseline.alpha_min", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.baseline.alpha_min = parse_double(v, k); }},
      {"baseline.alpha_max", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.baseline.alpha_max = parse_double(v, k); }},
      {"baseline.alpha_points", [](RunConfig& c, const std::string& v, const std::string& k) {
         c.baseline.alpha_points = parse_u64(v, k); }},
      {"output.dir", [](RunConfig& c, const std::string& v, const std::string&) {
         c.out_dir = v; }},
  };
  return table;
}

}  // namespace detail_config

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail_config::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      }
      section = detail_config::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = detail_config::trim(t.substr(0, eq));
    const std::string value = detail_config::trim(t.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": key outside any [section]");
    }
    const std::string full = section + "." + key;
    auto it = detail_config::setters().find(full);
    if (it == detail_config::setters().end()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unknown key '" + full + "'");
    }
    it->second(cfg, value, full);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

/// Canonical text form; also the hashing input.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  auto d = [](double v) { return format_double(v); };
  os << "[grid]\n";
  os << "n = " << c.grid.n << "\n";
  os << "length = " << d(c.grid.length) << "\n";
  os << "kappa = " << d(c.grid.kappa) << "\n";
  os << "dt = " << d(c.grid.dt) << "\n";
  os << "steps = " << c.grid.steps << "\n\n";
  os << "[data]\n";
  os << "count = " << c.data.count << "\n";
  os << "seed = " << c.data.seed << "\n";
  os << "sigma = " << d(c.data.sigma) << "\n";
  os << "target = " << (c.data.target_paper ? "paper" : "random") << "\n";
  os << "record_params = " << (c.data.record_params ? "true" : "false") << "\n\n";
  os << "[train]\n";
  os << "latent_dim = " << c.latent_dim << "\n";
  os << "iterations = " << c.train.iterations << "\n";
  os << "batch = " << c.train.batch_size << "\n";
  os << "critic_steps = " << c.train.critic_steps << "\n";
  os << "penalty_mode = "
     << (c.train.penalty_mode == nn::PenaltyMode::kGradientPenalty
             ? "gradient-penalty"
             : "weight-clip")
     << "\n";
  os << "penalty_weight = " << d(c.train.penalty_weight) << "\n";
  os << "clip = " << d(c.train.clip_bound) << "\n";
  os << "lr = " << d(c.train.learning_rate) << "\n";
  os << "beta1 = " << d(c.train.beta1) << "\n";
  os << "beta2 = " << d(c.train.beta2) << "\n";
  os << "swap_betas = " << (c.train.swap_betas ? "true" : "false") << "\n";
  os << "adam_eps = " << d(c.train.adam_eps) << "\n";
  os << "seed = " << c.train.seed << "\n";
  os << "checkpoint_interval = " << c.train.checkpoint_interval << "\n";
  os << "log_every = " << c.train.log_every << "\n\n";
  os << "[inference]\n";
  os << "proposal_std = " << d(c.inference.proposal_std) << "\n";
  os << "chain_length = " << c.inference.chain_length << "\n";
  os << "burn_in = " << c.inference.burn_in << "\n";
  os << "thinning = " << c.inference.thinning << "\n";
  os << "restarts = " << c.inference.restarts << "\n";
  os << "samples = " << c.inference.samples << "\n";
  os << "sigma = " << d(c.inference.sigma) << "\n";
  os << "seed = " << c.inference.seed << "\n";
  os << "gradient_tol = " << d(c.inference.gradient_tol) << "\n";
  os << "max_iterations = " << c.inference.max_iterations << "\n\n";
  os << "[baseline]\n";
  os << "alpha = " << d(c.baseline.alpha) << "\n";
  os << "alpha_min = " << d(c.baseline.alpha_min) << "\n";
  os << "alpha_max = " << d(c.baseline.alpha_max) << "\n";
  os << "alpha_points = " << c.baseline.alpha_points << "\n\n";
  os << "[output]\n";
  os << "dir = " << c.out_dir << "\n";
  return os.str();
}

/// FNV-1a 64-bit hash of the canonical serialization.
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = serialize_config(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace lpb
