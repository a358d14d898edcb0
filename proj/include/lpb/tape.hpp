#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lpb/detail/matrix.hpp"
#include "lpb/error.hpp"
#include "lpb/tensor.hpp"

namespace lpb::ad {

enum class Op : std::uint8_t {
  // clang-format off
  Input, Param, Constant,
  MatMul, Add, Tanh, LeakyRelu, Scale, Sum, Mean, Square, Sqrt,
  // clang-format on
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Param: return "param";
    case Op::Constant: return "constant";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Tanh: return "tanh";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Scale: return "scale";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
  }
  return "?";
}

struct NodeId {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
  friend bool operator==(NodeId a, NodeId b) { return a.index == b.index; }
};

/// Recorded computation graph over dense tensors with reverse-mode
/// differentiation.
///
/// Nodes are appended in topological order (operands must already exist), so
/// forward evaluation is a single in-order sweep and backward a single
/// reverse sweep. A tape is replayable: re-running forward() with identical
/// bound inputs and parameter storage reproduces values bit-exactly.
///
/// Input/Param/Constant nodes borrow their storage; the caller keeps the
/// tensors alive for the lifetime of the tape. Parameter storage may be
/// updated in place between forward passes (this is how training steps see
/// fresh weights without rebuilding the graph).
///
/// Tapes are single-threaded; distinct tapes share no state and may be used
/// concurrently.
class Tape {
 public:
  NodeId input(std::string name, std::vector<std::size_t> shape) {
    NodeId id = push(Op::Input, {}, {}, std::move(shape));
    nodes_[id.index].name = std::move(name);
    input_index_[nodes_[id.index].name] = id;
    return id;
  }

  NodeId param(std::string name, const Tensor& storage) {
    NodeId id = push(Op::Param, {}, {}, storage.shape);
    nodes_[id.index].bound = &storage;
    nodes_[id.index].name = std::move(name);
    param_index_[nodes_[id.index].name] = id;
    return id;
  }

  NodeId constant(const Tensor& storage) {
    NodeId id = push(Op::Constant, {}, {}, storage.shape);
    nodes_[id.index].bound = &storage;
    return id;
  }

  /// Constant whose storage is owned by the tape.
  NodeId literal(Tensor t) {
    owned_.push_back(std::move(t));
    return constant(owned_.back());
  }

  NodeId matmul(NodeId a, NodeId b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.shape.size() != 2 || nb.shape.size() != 2 ||
        na.shape[1] != nb.shape[0]) {
      throw ShapeError("matmul: incompatible shapes " + shape_str(na.shape) +
                       " x " + shape_str(nb.shape));
    }
    return push(Op::MatMul, a, b, {na.shape[0], nb.shape[1]});
  }

  /// Elementwise add with limited broadcasting: b may share a's shape, be a
  /// length-n vector added to every row of an [m x n] operand, or be a
  /// 1-element tensor added everywhere.
  NodeId add(NodeId a, NodeId b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    const bool same = na.shape == nb.shape;
    const bool row_bcast = na.shape.size() == 2 && nb.shape.size() == 1 &&
                           nb.shape[0] == na.shape[1];
    const bool scalar_bcast = nb.shape.size() == 1 && nb.shape[0] == 1 &&
                              element_count(na.shape) != 1;
    if (!(same || row_bcast || scalar_bcast)) {
      throw ShapeError("add: cannot broadcast " + shape_str(nb.shape) +
                       " onto " + shape_str(na.shape));
    }
    return push(Op::Add, a, b, na.shape);
  }

  NodeId tanh(NodeId x) { return push(Op::Tanh, x, {}, node(x).shape); }

  NodeId leaky_relu(NodeId x, double slope = 0.2) {
    NodeId id = push(Op::LeakyRelu, x, {}, node(x).shape);
    nodes_[id.index].attr = slope;
    return id;
  }

  NodeId scale(NodeId x, double factor) {
    NodeId id = push(Op::Scale, x, {}, node(x).shape);
    nodes_[id.index].attr = factor;
    return id;
  }

  NodeId sum(NodeId x) { return push(Op::Sum, x, {}, {1}); }
  NodeId mean(NodeId x) { return push(Op::Mean, x, {}, {1}); }
  NodeId square(NodeId x) { return push(Op::Square, x, {}, node(x).shape); }
  NodeId sqrt(NodeId x) { return push(Op::Sqrt, x, {}, node(x).shape); }

  /// Composite a - b, recorded as scale(b, -1) followed by add.
  NodeId subtract(NodeId a, NodeId b) { return add(a, scale(b, -1.0)); }

  void mark_output(NodeId id) {
    node(id);
    outputs_.push_back(id);
  }
  const std::vector<NodeId>& outputs() const { return outputs_; }

  /// Attach input storage by name. Must precede forward().
  void bind(std::string_view name, const Tensor& t) {
    auto it = input_index_.find(std::string(name));
    if (it == input_index_.end()) {
      throw ShapeError("bind: no input named '" + std::string(name) + "'");
    }
    Node& n = nodes_[it->second.index];
    if (t.shape != n.shape) {
      throw ShapeError("bind: input '" + std::string(name) + "' expects " +
                       shape_str(n.shape) + ", got " + t.shape_string());
    }
    n.bound = &t;
    forward_done_ = false;
  }

  /// Evaluate every node in recorded order. Throws NumericError naming the
  /// first op that produced a non-finite entry.
  void forward() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      switch (n.op) {
        case Op::Input:
          if (n.bound == nullptr) {
            throw ShapeError("forward: input '" + n.name + "' is unbound");
          }
          [[fallthrough]];
        case Op::Param:
        case Op::Constant:
          check_finite(*n.bound, i);
          continue;
        default:
          break;
      }
      eval(n);
      check_finite(n.value, i);
    }
    forward_done_ = true;
  }

  /// Reverse sweep seeding `cotangent` on the single marked output; fills
  /// gradients of every node (inputs and params included).
  void backward(const Tensor& cotangent) {
    if (outputs_.size() != 1) {
      throw ShapeError("backward: tape must have exactly one marked output");
    }
    backward(outputs_[0], cotangent);
  }

  void backward(NodeId output, const Tensor& cotangent) {
    if (!forward_done_) {
      throw NumericError("backward: forward has not been run on this tape");
    }
    const Node& out = node(output);
    if (cotangent.shape != out.shape) {
      throw ShapeError("backward: cotangent shape " + cotangent.shape_string() +
                       " does not match output " + shape_str(out.shape));
    }
    for (Node& n : nodes_) {
      n.grad.shape = n.shape;
      n.grad.data.assign(element_count(n.shape), 0.0);
    }
    nodes_[output.index].grad.data = cotangent.data;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      propagate(nodes_[i]);
      if (!nodes_[i].grad.all_finite()) {
        throw NumericError("non-finite gradient at op " + std::to_string(i) +
                           " (" + op_name(nodes_[i].op) + ")");
      }
    }
  }

  const Tensor& value(NodeId id) const {
    const Node& n = node(id);
    return n.bound != nullptr ? *n.bound : n.value;
  }

  const Tensor& gradient(NodeId id) const { return node(id).grad; }

  NodeId input_id(std::string_view name) const {
    auto it = input_index_.find(std::string(name));
    if (it == input_index_.end()) {
      throw ShapeError("no input named '" + std::string(name) + "'");
    }
    return it->second;
  }

  NodeId param_id(std::string_view name) const {
    auto it = param_index_.find(std::string(name));
    if (it == param_index_.end()) {
      throw ShapeError("no param named '" + std::string(name) + "'");
    }
    return it->second;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    NodeId a, b;
    double attr = 0.0;
    std::vector<std::size_t> shape;
    const Tensor* bound = nullptr;  // Input/Param/Constant storage
    Tensor value;                   // computed ops
    Tensor grad;
    std::string name;
  };

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return Tensor::element_count(s);
  }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += "x";
      out += std::to_string(s[i]);
    }
    return out + "]";
  }

  NodeId push(Op op, NodeId a, NodeId b, std::vector<std::size_t> shape) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.shape = std::move(shape);
    if (op != Op::Input && op != Op::Param && op != Op::Constant) {
      n.value.shape = n.shape;
      n.value.data.assign(element_count(n.shape), 0.0);
    }
    nodes_.push_back(std::move(n));
    forward_done_ = false;
    return NodeId{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  const Node& node(NodeId id) const {
    if (!id.valid() || static_cast<std::size_t>(id.index) >= nodes_.size()) {
      throw ShapeError("invalid node id");
    }
    return nodes_[id.index];
  }

  const Tensor& val(NodeId id) const {
    const Node& n = nodes_[id.index];
    return n.bound != nullptr ? *n.bound : n.value;
  }

  void check_finite(const Tensor& t, std::size_t op_index) const {
    if (!t.all_finite()) {
      throw NumericError("non-finite value at op " + std::to_string(op_index) +
                         " (" + op_name(nodes_[op_index].op) + ")");
    }
  }

  void eval(Node& n) {
    const Tensor& a = val(n.a);
    switch (n.op) {
      case Op::MatMul: {
        const Tensor& b = val(n.b);
        detail::matmul(n.value.data.data(), a.data.data(), b.data.data(),
                       a.shape[0], a.shape[1], b.shape[1]);
        break;
      }
      case Op::Add: {
        const Tensor& b = val(n.b);
        if (b.data.size() == a.data.size()) {
          for (std::size_t i = 0; i < a.data.size(); ++i) {
            n.value.data[i] = a.data[i] + b.data[i];
          }
        } else if (b.data.size() == 1) {
          for (std::size_t i = 0; i < a.data.size(); ++i) {
            n.value.data[i] = a.data[i] + b.data[0];
          }
        } else {  // row broadcast
          const std::size_t cols = b.data.size();
          for (std::size_t i = 0; i < a.data.size(); ++i) {
            n.value.data[i] = a.data[i] + b.data[i % cols];
          }
        }
        break;
      }
      case Op::Tanh:
        for (std::size_t i = 0; i < a.data.size(); ++i) {
          n.value.data[i] = std::tanh(a.data[i]);
        }
        break;
      case Op::LeakyRelu:
        for (std::size_t i = 0; i < a.data.size(); ++i) {
          const double x = a.data[i];
          n.value.data[i] = x >= 0.0 ? x : n.attr * x;
        }
        break;
      case Op::Scale:
        for (std::size_t i = 0; i < a.data.size(); ++i) {
          n.value.data[i] = n.attr * a.data[i];
        }
        break;
      case Op::Sum: {
        double acc = 0.0;
        for (double v : a.data) acc += v;
        n.value.data[0] = acc;
        break;
      }
      case Op::Mean: {
        double acc = 0.0;
        for (double v : a.data) acc += v;
        n.value.data[0] = acc / static_cast<double>(a.data.size());
        break;
      }
      case Op::Square:
        for (std::size_t i = 0; i < a.data.size(); ++i) {
          n.value.data[i] = a.data[i] * a.data[i];
        }
        break;
      case Op::Sqrt:
        for (std::size_t i = 0; i < a.data.size(); ++i) {
          n.value.data[i] = std::sqrt(a.data[i]);
        }
        break;
      default:
        throw NumericError("unsupported op kind");
    }
  }

  void propagate(Node& n) {
    if (n.op == Op::Input || n.op == Op::Param || n.op == Op::Constant) return;
    const std::vector<double>& g = n.grad.data;
    const Tensor& a = val(n.a);
    std::vector<double>& ga = nodes_[n.a.index].grad.data;
    switch (n.op) {
      case Op::MatMul: {
        const Tensor& b = val(n.b);
        std::vector<double>& gb = nodes_[n.b.index].grad.data;
        const std::size_t m = a.shape[0], k = a.shape[1], c = b.shape[1];
        detail::matmul_nt_acc(ga.data(), g.data(), b.data.data(), m, c, k);
        detail::matmul_tn_acc(gb.data(), a.data.data(), g.data(), m, k, c);
        break;
      }
      case Op::Add: {
        std::vector<double>& gb = nodes_[n.b.index].grad.data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (gb.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else if (gb.size() == 1) {
          for (double v : g) gb[0] += v;
        } else {
          const std::size_t cols = gb.size();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
        }
        break;
      }
      case Op::Tanh:
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double t = n.value.data[i];
          ga[i] += g[i] * (1.0 - t * t);
        }
        break;
      case Op::LeakyRelu:
        // Derivative at exactly zero is the positive-side slope 1.
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * (a.data[i] >= 0.0 ? 1.0 : n.attr);
        }
        break;
      case Op::Scale:
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.attr;
        break;
      case Op::Sum:
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      case Op::Mean: {
        const double inv = 1.0 / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
        break;
      }
      case Op::Square:
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * 2.0 * a.data[i];
        }
        break;
      case Op::Sqrt:
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * 0.5 / n.value.data[i];
        }
        break;
      default:
        break;
    }
  }

  std::vector<Node> nodes_;
  std::deque<Tensor> owned_;
  std::vector<NodeId> outputs_;
  std::unordered_map<std::string, NodeId> input_index_;
  std::unordered_map<std::string, NodeId> param_index_;
  bool forward_done_ = false;
};

}  // namespace lpb::ad
