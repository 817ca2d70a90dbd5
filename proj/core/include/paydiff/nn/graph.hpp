#pragma once

#include <functional>
#include <vector>

#include "paydiff/nn/tensor.hpp"

namespace paydiff::nn {

/// Handle to a value recorded on a Graph.
struct Var {
  int id = -1;
};

/// Reverse-mode tape. Every op appends one node; backward() walks the nodes
/// in reverse and accumulates parameter gradients into Parameter::grad.
///
/// Layouts: sequences are [batch, channels, length], features [batch, dim].
template <class T>
class Graph {
 public:
  /// With record = false no backward closures are kept (inference).
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor<T> value);
  Var param(Parameter<T>& p);

  const Tensor<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Tensor<T>& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss) = 1 on a single-element value and sweeps the tape once.
  void backward(Var loss);

  Var conv1d(Var x, Var w, Var b, int stride = 1, int padding = 0);
  Var linear(Var x, Var w, Var b);
  Var group_norm(Var x, Var gamma, Var beta, int groups, T eps = T(1e-5));
  Var silu(Var x);
  Var add(Var a, Var b);
  Var add_scalar(Var x, T c);
  /// Multiplies batch element b (leading axis) by scale[b].
  Var scale_batch(Var x, const std::vector<T>& scale);
  /// scale, shift: [batch, channels], broadcast over length.
  Var film(Var x, Var scale, Var shift);
  /// shift only (additive conditioning).
  Var add_channel(Var x, Var shift);
  Var concat_channels(Var a, Var b);
  Var concat_features(Var a, Var b);
  /// Columns [from, from + count) of a [batch, dim] value.
  Var slice_features(Var x, int from, int count);
  Var upsample2(Var x);
  /// Mean squared error over all elements, as a single-element value.
  Var mse(Var a, Var b);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    bool needs = false;
    std::function<void()> backward;
  };

  Var push(Tensor<T> value, bool needs);
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  Tensor<T>& g(Var v);  // allocates the gradient on first use
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs; }

  std::vector<Node> nodes_;
  bool record_;
};

}  // namespace paydiff::nn
