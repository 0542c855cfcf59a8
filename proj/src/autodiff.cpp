#include "embreg/autodiff.hpp"

#include "embreg/resample.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace embreg {

std::string shape_string(const Tensor& t) {
  std::ostringstream os;
  os << '[' << t.rows() << 'x' << t.cols() << ']';
  return os.str();
}

const Tensor& Var::value() const { return graph_->nodes_[id_].value; }
const Tensor& Var::grad() const { return graph_->nodes_[id_].grad; }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw DimensionError("expected a scalar node, got " + shape_string(v));
  return v(0, 0);
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, OpKind::Leaf, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, OpKind::Leaf, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::emplace(Tensor value, OpKind kind, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (Var p : parents) needs = needs || nodes_[p.id()].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, kind, needs, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
    n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Graph::zero_grad() {
  for (Node& n : nodes_) n.grad.resize(0, 0);
}

void Graph::backward(Var root) {
  if (root.graph_ != this) throw ArgumentError("backward: root belongs to another graph");
  if (root.value().size() != 1) {
    throw ArgumentError("backward: root must be scalar, got " + shape_string(root.value()));
  }
  for (Node& n : nodes_) {
    if (n.kind != OpKind::Leaf) n.grad.resize(0, 0);
  }
  grad_buffer(root)(0, 0) += 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

namespace {

Graph& same_graph(Var a, Var b, const char* op) {
  if (&a.graph() != &b.graph()) throw ArgumentError(std::string(op) + ": operands from different graphs");
  return a.graph();
}

enum class Broadcast { None, Row };

Broadcast check_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::None;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(b) + " onto " +
                       shape_string(a));
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.value()) + " * " +
                         shape_string(b.value()));
  }
  Tensor out = a.value() * b.value();
  return g.emplace(std::move(out), OpKind::MatMul, {a, b}, [a, b](Graph& g, const Tensor& G) {
    if (g.requires_grad(a)) g.grad_buffer(a).noalias() += G * b.value().transpose();
    if (g.requires_grad(b)) g.grad_buffer(b).noalias() += a.value().transpose() * G;
  });
}

Var elementwise(Var a, Var b, Elementwise kind) {
  switch (kind) {
    case Elementwise::Add:
      return add(a, b);
    case Elementwise::Mul:
      return mul(a, b);
  }
  throw ArgumentError("elementwise: unknown kind");
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b, "add");
  const Broadcast bc = check_broadcast(a.value(), b.value(), "add");
  Tensor out = a.value();
  if (bc == Broadcast::None) {
    out += b.value();
  } else {
    out.rowwise() += b.value().row(0);
  }
  return g.emplace(std::move(out), OpKind::Add, {a, b}, [a, b, bc](Graph& g, const Tensor& G) {
    if (g.requires_grad(a)) g.grad_buffer(a) += G;
    if (g.requires_grad(b)) {
      if (bc == Broadcast::None) {
        g.grad_buffer(b) += G;
      } else {
        g.grad_buffer(b) += G.colwise().sum();
      }
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b, "sub");
  const Broadcast bc = check_broadcast(a.value(), b.value(), "sub");
  Tensor out = a.value();
  if (bc == Broadcast::None) {
    out -= b.value();
  } else {
    out.rowwise() -= b.value().row(0);
  }
  return g.emplace(std::move(out), OpKind::Sub, {a, b}, [a, b, bc](Graph& g, const Tensor& G) {
    if (g.requires_grad(a)) g.grad_buffer(a) += G;
    if (g.requires_grad(b)) {
      if (bc == Broadcast::None) {
        g.grad_buffer(b) -= G;
      } else {
        g.grad_buffer(b) -= G.colwise().sum();
      }
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b, "mul");
  const Broadcast bc = check_broadcast(a.value(), b.value(), "mul");
  Tensor out = a.value();
  if (bc == Broadcast::None) {
    out.array() *= b.value().array();
  } else {
    out.array().rowwise() *= b.value().row(0).array();
  }
  return g.emplace(std::move(out), OpKind::Mul, {a, b}, [a, b, bc](Graph& g, const Tensor& G) {
    if (bc == Broadcast::None) {
      if (g.requires_grad(a)) g.grad_buffer(a).array() += G.array() * b.value().array();
      if (g.requires_grad(b)) g.grad_buffer(b).array() += G.array() * a.value().array();
    } else {
      if (g.requires_grad(a)) {
        g.grad_buffer(a).array() += G.array().rowwise() * b.value().row(0).array();
      }
      if (g.requires_grad(b)) {
        g.grad_buffer(b) += (G.array() * a.value().array()).matrix().colwise().sum();
      }
    }
  });
}

Var linear(Var x, Var w, Var b) { return add(matmul(x, w), b); }

Var activation(Var a, Activation kind) {
  switch (kind) {
    case Activation::Relu:
      return relu(a);
    case Activation::Sigmoid:
      return sigmoid(a);
  }
  throw ArgumentError("activation: unknown kind");
}

Var relu(Var a) {
  Tensor out = a.value().cwiseMax(0.0);
  return a.graph().emplace(std::move(out), OpKind::Relu, {a}, [a](Graph& g, const Tensor& G) {
    g.grad_buffer(a).array() += (a.value().array() > 0.0).select(G.array(), 0.0);
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value().unaryExpr([](double x) {
    // split by sign so exp never overflows
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Tensor s = out;
  return a.graph().emplace(std::move(out), OpKind::Sigmoid, {a}, [a, s = std::move(s)](Graph& g, const Tensor& G) {
    g.grad_buffer(a).array() += G.array() * s.array() * (1.0 - s.array());
  });
}

Var abs(Var a) {
  Tensor out = a.value().cwiseAbs();
  return a.graph().emplace(std::move(out), OpKind::Abs, {a}, [a](Graph& g, const Tensor& G) {
    const auto sign = a.value().array().unaryExpr([](double x) { return double((x > 0.0) - (x < 0.0)); });
    g.grad_buffer(a).array() += G.array() * sign;
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value() * factor;
  return a.graph().emplace(std::move(out), OpKind::Scale, {a}, [a, factor](Graph& g, const Tensor& G) {
    g.grad_buffer(a) += G * factor;
  });
}

Var sum(Var a) {
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().emplace(std::move(out), OpKind::Sum, {a}, [a](Graph& g, const Tensor& G) {
    g.grad_buffer(a).array() += G(0, 0);
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw ArgumentError("add_n: no terms");
  Graph& g = terms.front().graph();
  Tensor out = terms.front().value();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    same_graph(terms.front(), terms[i], "add_n");
    if (terms[i].rows() != out.rows() || terms[i].cols() != out.cols()) {
      throw DimensionError("add_n: term " + std::to_string(i) + " has shape " +
                           shape_string(terms[i].value()) + ", expected " + shape_string(out));
    }
    out += terms[i].value();
  }
  std::vector<Var> ids(terms.begin(), terms.end());
  return g.emplace(std::move(out), OpKind::AddN, terms, [ids = std::move(ids)](Graph& g, const Tensor& G) {
    for (Var t : ids) {
      if (g.requires_grad(t)) g.grad_buffer(t) += G;
    }
  });
}

Var mean_pool_time(Var a, Index factor) {
  if (factor < 1) throw ArgumentError("mean_pool_time: factor must be positive, got " + std::to_string(factor));
  const Index T = a.rows();
  if (T % factor != 0) {
    throw DimensionError("mean_pool_time: " + std::to_string(T) + " frames not divisible by factor " +
                         std::to_string(factor));
  }
  const Index out_rows = T / factor;
  const double inv = 1.0 / static_cast<double>(factor);
  Tensor out = pool_frames(a.value(), factor);
  return a.graph().emplace(std::move(out), OpKind::MeanPoolTime, {a},
                           [a, factor, inv, out_rows](Graph& g, const Tensor& G) {
                             Tensor& ga = g.grad_buffer(a);
                             for (Index r = 0; r < out_rows; ++r) {
                               ga.middleRows(r * factor, factor).rowwise() += G.row(r) * inv;
                             }
                           });
}

Var repeat_time(Var a, Index factor) {
  if (factor < 1) throw ArgumentError("repeat_time: factor must be at least 1, got " + std::to_string(factor));
  const Index T = a.rows();
  Tensor out = repeat_frames(a.value(), factor);
  return a.graph().emplace(std::move(out), OpKind::RepeatTime, {a}, [a, factor, T](Graph& g, const Tensor& G) {
    Tensor& ga = g.grad_buffer(a);
    for (Index r = 0; r < T; ++r) ga.row(r) += G.middleRows(r * factor, factor).colwise().sum();
  });
}

Var concat_cols(Var a, Var b) {
  Graph& g = same_graph(a, b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: frame counts differ, " + shape_string(a.value()) + " vs " +
                         shape_string(b.value()));
  }
  const Index ca = a.cols();
  const Index cb = b.cols();
  Tensor out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  return g.emplace(std::move(out), OpKind::ConcatCols, {a, b}, [a, b, ca, cb](Graph& g, const Tensor& G) {
    if (g.requires_grad(a)) g.grad_buffer(a) += G.leftCols(ca);
    if (g.requires_grad(b) && cb > 0) g.grad_buffer(b) += G.rightCols(cb);
  });
}

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(a.value()));
  }
  Tensor out = a.value().middleRows(start, count);
  return a.graph().emplace(std::move(out), OpKind::SliceRows, {a}, [a, start, count](Graph& g, const Tensor& G) {
    g.grad_buffer(a).middleRows(start, count) += G;
  });
}

Var cosine_distance_frames(Var a, Var b) {
  Graph& g = same_graph(a, b, "cosine_distance_frames");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("cosine_distance_frames: shapes differ, " + shape_string(a.value()) + " vs " +
                         shape_string(b.value()));
  }
  const Index T = a.rows();
  if (T == 0) throw DimensionError("cosine_distance_frames: no frames");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();

  Eigen::VectorXd dots(T), na(T), nb(T);
  double total = 0.0;
  for (Index t = 0; t < T; ++t) {
    dots(t) = av.row(t).dot(bv.row(t));
    na(t) = av.row(t).norm();
    nb(t) = bv.row(t).norm();
    const double denom = std::max(na(t) * nb(t), kCosineEps);
    total += std::clamp(1.0 - dots(t) / denom, 0.0, 2.0);
  }
  Tensor out(1, 1);
  out(0, 0) = total / static_cast<double>(T);

  return g.emplace(std::move(out), OpKind::CosineDistanceFrames, {a, b},
                   [a, b, T, dots = std::move(dots), na = std::move(na), nb = std::move(nb)](
                       Graph& g, const Tensor& G) {
                     const double coeff = -G(0, 0) / static_cast<double>(T);
                     const bool ga = g.requires_grad(a);
                     const bool gb = g.requires_grad(b);
                     for (Index t = 0; t < T; ++t) {
                       const double prod = na(t) * nb(t);
                       const auto ar = a.value().row(t);
                       const auto br = b.value().row(t);
                       if (prod > kCosineEps) {
                         const double s = dots(t) / prod;
                         // d s / d a = b / (|a||b|) - s a / |a|^2, symmetric for b
                         if (ga) g.grad_buffer(a).row(t) += coeff * (br / prod - (s / (na(t) * na(t))) * ar);
                         if (gb) g.grad_buffer(b).row(t) += coeff * (ar / prod - (s / (nb(t) * nb(t))) * br);
                       } else {
                         if (ga) g.grad_buffer(a).row(t) += (coeff / kCosineEps) * br;
                         if (gb) g.grad_buffer(b).row(t) += (coeff / kCosineEps) * ar;
                       }
                     }
                   });
}

Var bce_loss(Var pred, const Tensor& target) {
  const Tensor& p = pred.value();
  if (p.rows() != target.rows() || p.cols() != target.cols()) {
    throw DimensionError("bce_loss: prediction " + shape_string(p) + " vs target " + shape_string(target));
  }
  for (Index i = 0; i < target.size(); ++i) {
    const double y = target.data()[i];
    if (y != 0.0 && y != 1.0) throw ArgumentError("bce_loss: target value " + std::to_string(y) + " is not 0 or 1");
  }
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double pi = p.data()[i];
    const double y = target.data()[i];
    total -= y * std::log(std::max(pi, kBceEps)) + (1.0 - y) * std::log(std::max(1.0 - pi, kBceEps));
  }
  Tensor out(1, 1);
  out(0, 0) = total / n;
  return pred.graph().emplace(std::move(out), OpKind::Bce, {pred}, [pred, target, n](Graph& g, const Tensor& G) {
    Tensor& gp = g.grad_buffer(pred);
    const Tensor& p = pred.value();
    const double c = G(0, 0) / n;
    for (Index i = 0; i < p.size(); ++i) {
      const double pi = p.data()[i];
      const double y = target.data()[i];
      double d = 0.0;
      if (y == 1.0) {
        if (pi > kBceEps) d = -1.0 / pi;
      } else if (1.0 - pi > kBceEps) {
        d = 1.0 / (1.0 - pi);
      }
      gp.data()[i] += c * d;
    }
  });
}

double grad_check(const GraphBuilder& builder, const Tensor& point, double h) {
  Tensor analytic;
  {
    Graph g;
    Var x = g.variable(point);
    Var out = builder(g, x);
    g.backward(out);
    analytic = x.grad().size() == 0 ? Tensor::Zero(point.rows(), point.cols()) : x.grad();
  }
  auto evaluate = [&](const Tensor& at) {
    Graph g;
    Var x = g.constant(at);
    return builder(g, x).scalar();
  };
  double worst = 0.0;
  Tensor probe = point;
  for (Index i = 0; i < point.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = evaluate(probe);
    probe.data()[i] = orig - h;
    const double down = evaluate(probe);
    probe.data()[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a), 1.0));
  }
  return worst;
}

}  // namespace embreg
