#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "vrff/tensor.hpp"

namespace vrff {

class Graph;

/// Handle to a node in a Graph; cheap to copy, invalid when default-built.
struct Var {
  Graph* graph = nullptr;
  int id = -1;
  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& value() const;  // shorthand for graph->value(*this)
};

enum class Op : uint8_t {
  leaf,
  add,
  sub,
  mul,  // elementwise
  matmul,
  transpose,
  concat_rows,
  concat_cols,
  slice,
  sum_all,
  sum_rows,  // collapse rows -> 1xC (column totals)
  sum_cols,  // collapse cols -> Rx1 (row totals)
  mean_all,
  mean_rows,  // column means -> 1xC
  tanh,
  sigmoid,
  relu,
  elu,  // slope-1: x>0 ? x : exp(x)-1
  softmax_rows,
  exp,
  log,
  square,
  negate,
  cos,
  scale,          // multiply by a constant scalar
  add_scalar,     // add a constant scalar
  cholesky_solve  // X solving A X = B, A symmetric positive definite
};

/// Append-only reverse-mode tape over rank-2 tensors.
///
/// Nodes are recorded in evaluation order, so the append order is a
/// topological order and one reverse sweep from a scalar loss populates the
/// gradient of every reachable node. Construction and backward are
/// single-threaded; all arithmetic runs in a fixed order, so identical inputs
/// give bit-identical values and gradients.
class Graph {
public:
  Var leaf(Tensor value, bool trainable);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() loss w.r.t. node v; zeros if v was not
  /// reached.
  const Tensor& grad(Var v);
  bool has_grad(Var v) const;
  size_t node_count() const { return nodes_.size(); }

  /// Reverse sweep from a scalar (1x1) node. Rejects non-scalar losses.
  void backward(Var loss);

  Var apply(Op op, Var a);
  Var apply(Op op, Var a, Var b);
  Var apply_with_scalar(Op op, Var a, double s);
  Var apply_slice(Var a, int64_t r0, int64_t r1, int64_t c0, int64_t c1);

private:
  struct Node {
    Op op = Op::leaf;
    std::array<int, 2> parents{-1, -1};
    Tensor value;
    Tensor grad;            // empty until touched by backward
    bool trainable = false;
    double scalar = 0.0;                   // scale / add_scalar
    std::array<int64_t, 4> bounds{};       // slice
    Tensor factor;                         // cholesky_solve: cached L
  };

  Tensor& grad_buffer(int id);
  int check(Var v) const;

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph->value(*this); }

/// Creates at most one trainable leaf per distinct parameter tensor per
/// graph, so a parameter used in several places accumulates one gradient.
class Binder {
public:
  explicit Binder(Graph& g) : graph_(&g) {}

  Var operator()(const Tensor& param);
  Var constant(Tensor t) { return graph_->constant(std::move(t)); }
  bool bound(const Tensor& param) const;
  Var lookup(const Tensor& param) const;  // invalid Var if unbound
  Graph& graph() { return *graph_; }

private:
  Graph* graph_;
  std::unordered_map<const Tensor*, Var> leaves_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);  // elementwise
Var matmul(Var a, Var b);
Var transposed(Var a);
Var concat_rows(Var a, Var b);
Var concat_cols(Var a, Var b);
Var slice(Var a, int64_t r0, int64_t r1, int64_t c0, int64_t c1);
Var slice_rows(Var a, int64_t r0, int64_t r1);
/// Stack n copies of a 1xC row (ones(n,1) @ row); the row's gradient is the
/// column sum of the incoming gradient.
Var broadcast_rows(Var row, int64_t n);
Var sum_all(Var a);
Var sum_rows(Var a);
Var sum_cols(Var a);
Var mean_all(Var a);
Var mean_rows(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var elu(Var a);
Var softmax_rows(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var negate(Var a);
Var cos(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var cholesky_solve(Var a, Var b);

}  // namespace vrff
