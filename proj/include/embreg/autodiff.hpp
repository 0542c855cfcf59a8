#pragma once

#include "embreg/tensor.hpp"

#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace embreg {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Accumulated gradient; an empty (0x0) tensor before backward reaches it.
  const Tensor& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Relu,
  Sigmoid,
  Abs,
  Scale,
  Sum,
  AddN,
  MeanPoolTime,
  RepeatTime,
  ConcatCols,
  SliceRows,
  CosineDistanceFrames,
  Bce,
};

/// Tape of a reverse-mode computation. Nodes are appended in evaluation order,
/// so creation order is a topological order and backward walks it in reverse.
/// Not thread-safe; build one graph per thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that accumulates a gradient on backward().
  Var variable(Tensor value);

  /// Reverse-mode sweep from a 1x1 root. Leaf gradients accumulate across
  /// calls until zero_grad(); interior gradients are rebuilt on every call.
  void backward(Var root);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_[v.id()].kind; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  /// Appends an interior node. Used by the op free functions.
  Var emplace(Tensor value, OpKind kind, std::span<const Var> parents, BackwardFn fn);
  Var emplace(Tensor value, OpKind kind, std::initializer_list<Var> parents, BackwardFn fn) {
    return emplace(std::move(value), kind, std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
  }
  /// Gradient buffer of `v`, zero-initialized on first touch.
  Tensor& grad_buffer(Var v);

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    OpKind kind = OpKind::Leaf;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

// Per-frame linear algebra --------------------------------------------------

Var matmul(Var a, Var b);

enum class Elementwise { Add, Mul };
/// `b` must match `a` or be a single row broadcast over every row of `a`.
Var elementwise(Var a, Var b, Elementwise kind);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x * w + b, with b a single row.
Var linear(Var x, Var w, Var b);

enum class Activation { Relu, Sigmoid };
Var activation(Var a, Activation kind);
Var relu(Var a);
Var sigmoid(Var a);
Var abs(Var a);
Var scale(Var a, double factor);

/// Sum of all entries as a 1x1 node.
Var sum(Var a);
/// Elementwise sum of equally shaped nodes.
Var add_n(std::span<const Var> terms);

// Time-axis resampling ------------------------------------------------------

Var mean_pool_time(Var a, Index factor);
Var repeat_time(Var a, Index factor);

Var concat_cols(Var a, Var b);
Var slice_rows(Var a, Index start, Index count);

// Losses --------------------------------------------------------------------

inline constexpr double kCosineEps = 1e-8;
inline constexpr double kBceEps = 1e-12;

/// Mean over frames t of 1 - <a_t, b_t> / max(|a_t| |b_t|, 1e-8).
Var cosine_distance_frames(Var a, Var b);

/// Mean binary cross-entropy over every entry; `target` holds only 0 or 1.
Var bce_loss(Var pred, const Tensor& target);

// Finite-difference check ---------------------------------------------------

using GraphBuilder = std::function<Var(Graph&, Var)>;

/// max_i |analytic_i - central_i| / max(|analytic_i|, 1) for the scalar graph
/// produced by `builder` at `point`.
double grad_check(const GraphBuilder& builder, const Tensor& point, double h = 1e-4);

}  // namespace embreg
