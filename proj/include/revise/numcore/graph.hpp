#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "revise/error.hpp"
#include "revise/numcore/params.hpp"
#include "revise/numcore/tensor.hpp"

namespace revise::num {

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Tape of operation records. Nodes are appended in creation order, so reverse
// index order is a topological order of the (acyclic) graph.
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false); }

  // Trainable leaf bound to a store entry. Repeated requests share one node.
  Var param(const ParamStore& store, const std::string& name) {
    if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var{this, it->second};
    Var v = push(store.value(name), {}, nullptr, true);
    param_nodes_[name] = v.id;
    return v;
  }

  // Frozen view of a stored parameter: participates in forward only.
  Var frozen(const ParamStore& store, const std::string& name) { return constant(store.value(name)); }

  Var record(Tensor value, std::vector<std::size_t> parents, Backward backward) {
    bool needs = false;
    for (std::size_t p : parents) needs = needs || nodes_[p].requires_grad;
    return push(std::move(value), std::move(parents), needs ? std::move(backward) : nullptr, needs);
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, zero-initialised on first touch.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }

  // Reverse sweep from a scalar loss. Returns d loss / d p for every parameter
  // leaf in the graph (zeros when the loss does not depend on it).
  Gradients backward(Var loss) {
    if (loss.graph != this) throw ValidationError("backward: loss belongs to another graph");
    if (!nodes_[loss.id].value.is_scalar()) {
      throw ShapeError("backward: loss must be scalar, got " + shape_string(nodes_[loss.id].value.shape()));
    }
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    visited_ = 0;
    grad(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.requires_grad) continue;
      ++visited_;
      if (n.backward) n.backward(*this, i);
    }
    Gradients out;
    for (const auto& [name, id] : param_nodes_) {
      out[name] = nodes_[id].has_grad ? nodes_[id].grad : Tensor(nodes_[id].value.shape());
    }
    return out;
  }

  // Nodes processed by the last backward sweep.
  std::size_t visited() const { return visited_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    Backward backward;
  };

  Var push(Tensor value, std::vector<std::size_t> parents, Backward backward, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward = std::move(backward);
    n.requires_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> param_nodes_;
  std::size_t visited_ = 0;
};

inline const Tensor& Var::value() const { return graph->value(id); }

namespace detail {

inline Graph& same_graph(const char* op, Var a, Var b) {
  if (a.graph != b.graph || a.graph == nullptr) {
    throw ValidationError(std::string(op) + ": operands belong to different graphs");
  }
  return *a.graph;
}

// Elementwise binary op with equal shapes or a scalar operand on either side.
template <typename F, typename DA, typename DB>
Var elementwise(const char* op, Var a, Var b, F f, DA da, DB db) {
  Graph& g = same_graph(op, a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const bool same = x.shape() == y.shape();
  const bool ys = !same && y.is_scalar();
  const bool xs = !same && !ys && x.is_scalar();
  if (!same && !ys && !xs) {
    throw ShapeError(std::string(op) + ": lhs " + shape_string(x.shape()) + " vs rhs " +
                     shape_string(y.shape()));
  }
  Tensor out(xs ? y.shape() : x.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(x[xs ? 0 : i], y[ys ? 0 : i]);
  return g.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id, xs, ys, da, db](Graph& g, std::size_t self) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    const Tensor& go = g.grad(self);
    const std::size_t n = go.size();
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad(a);
      for (std::size_t i = 0; i < n; ++i) ga[xs ? 0 : i] += go[i] * da(x[xs ? 0 : i], y[ys ? 0 : i]);
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b);
      for (std::size_t i = 0; i < n; ++i) gb[ys ? 0 : i] += go[i] * db(x[xs ? 0 : i], y[ys ? 0 : i]);
    }
  });
}

// Elementwise unary op; derivative expressed through input x and output y.
template <typename F, typename D>
Var unary(Var a, F f, D d) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return g.record(std::move(out), {a.id}, [a = a.id, d](Graph& g, std::size_t self) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(self);
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad(a);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += go[i] * d(x[i], y[i]);
  });
}

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace detail

inline Var add(Var a, Var b) {
  return detail::elementwise("add", a, b, [](double x, double y) { return x + y; },
                             [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::elementwise("sub", a, b, [](double x, double y) { return x - y; },
                             [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::elementwise("mul", a, b, [](double x, double y) { return x * y; },
                             [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Var scale(Var a, double s) {
  return detail::unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

inline Var tanh(Var a) {
  return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
  return detail::unary(a, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Var relu(Var a) {
  return detail::unary(a, [](double x) { return x > 0 ? x : 0.0; },
                       [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

inline Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0)) throw ValidationError("log: non-positive operand");
  }
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// log(1 + e^x); derivative sigma(x).
inline Var softplus(Var a) {
  return detail::unary(a, detail::stable_softplus, [](double x, double) { return detail::stable_sigmoid(x); });
}

// Gradient passes where lo <= x <= hi.
inline Var clamp(Var a, double lo, double hi) {
  return detail::unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                       [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

inline Var sum(Var a) {
  Graph& g = *a.graph;
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return g.record(Tensor::scalar(s), {a.id}, [a = a.id](Graph& g, std::size_t self) {
    const double go = g.grad(self)[0];
    for (double& v : g.grad(a).data()) v += go;
  });
}

inline Var mean(Var a) {
  Graph& g = *a.graph;
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return g.record(Tensor::scalar(s / n), {a.id}, [a = a.id, n](Graph& g, std::size_t self) {
    const double go = g.grad(self)[0] / n;
    for (double& v : g.grad(a).data()) v += go;
  });
}

inline Var sum_squares(Var a) {
  Graph& g = *a.graph;
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  return g.record(Tensor::scalar(s), {a.id}, [a = a.id](Graph& g, std::size_t self) {
    const double go = g.grad(self)[0];
    const Tensor& x = g.value(a);
    Tensor& ga = g.grad(a);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * go * x[i];
  });
}

// Per-row mean: [m x n] -> [m x 1].
inline Var row_mean(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out(Shape{m, 1});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += x[i * n + j];
    out[i] = s / static_cast<double>(n);
  }
  return g.record(std::move(out), {a.id}, [a = a.id, m, n](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad(a);
    for (std::size_t i = 0; i < m; ++i) {
      const double v = go[i] / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += v;
    }
  });
}

// Row-wise softmax, max-shifted.
inline Var softmax_rows(Var x) {
  Graph& g = *x.graph;
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double hi = xv[i * n];
    for (std::size_t j = 1; j < n; ++j) hi = std::max(hi, xv[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += out[i * n + j] = std::exp(xv[i * n + j] - hi);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return g.record(std::move(out), {x.id}, [xid = x.id, m, n](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& gx = g.grad(xid);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += go[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (go[i * n + j] - dot);
    }
  });
}

// Row-wise sum: [m x n] -> [m x 1].
inline Var row_sum(Var a) { return scale(row_mean(a), static_cast<double>(a.value().cols())); }

// x [m x n] scaled row-wise by s [m x 1].
inline Var scale_rows(Var x, Var s) {
  Graph& g = detail::same_graph("scale_rows", x, s);
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (sv.size() != m) {
    throw ShapeError("scale_rows: x " + shape_string(xv.shape()) + " vs scale " + shape_string(sv.shape()));
  }
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * sv[i];
  return g.record(std::move(out), {x.id, s.id}, [x = x.id, s = s.id, m, n](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(x)) {
      const Tensor& sv = g.value(s);
      Tensor& gx = g.grad(x);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[i * n + j] * sv[i];
    }
    if (g.requires_grad(s)) {
      const Tensor& xv = g.value(x);
      Tensor& gs = g.grad(s);
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * xv[i * n + j];
        gs[i] += acc;
      }
    }
  });
}

inline Var matmul(Var a, Var b) {
  Graph& g = detail::same_graph("matmul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t m = x.rows(), k = x.cols();
  if (x.rank() > 2 || y.rank() != 2 || y.rows() != k) {
    throw ShapeError("matmul: lhs " + shape_string(x.shape()) + " vs rhs " + shape_string(y.shape()));
  }
  const std::size_t n = y.cols();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double s = x[i * k + p];
      const double* yr = &y[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += s * yr[j];
    }
  }
  return g.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id, m, k, n](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad(a);
      // Row-wise against y transposed, so the inner loop is an axpy.
      std::vector<double> yt(k * n);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) yt[j * k + p] = y[p * n + j];
      for (std::size_t i = 0; i < m; ++i) {
        const double* gr = &go[i * n];
        double* ar = &ga[i * k];
        for (std::size_t j = 0; j < n; ++j) {
          const double s = gr[j];
          const double* tr = &yt[j * k];
          for (std::size_t p = 0; p < k; ++p) ar[p] += s * tr[p];
        }
      }
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b);
      for (std::size_t i = 0; i < m; ++i) {
        const double* gr = &go[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double s = x[i * k + p];
          double* br = &gb[p * n];
          for (std::size_t j = 0; j < n; ++j) br[j] += s * gr[j];
        }
      }
    }
  });
}

// Row-broadcast bias: x [m x n] + b [n] (or [1 x n]).
inline Var add_bias(Var x, Var b) {
  Graph& g = detail::same_graph("add_bias", x, b);
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (bv.size() != n || bv.rows() != 1) {
    throw ShapeError("add_bias: x " + shape_string(xv.shape()) + " vs bias " + shape_string(bv.shape()));
  }
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return g.record(std::move(out), {x.id, b.id}, [x = x.id, b = b.id, m, n](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(x)) {
      Tensor& gx = g.grad(x);
      for (std::size_t i = 0; i < m * n; ++i) gx[i] += go[i];
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
    }
  });
}

// Column-wise concatenation of matrices with equal row counts.
inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Graph& g = *parts.front().graph;
  const std::size_t m = parts.front().value().rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.graph != &g) throw ValidationError("concat: operands belong to different graphs");
    if (p.value().rows() != m || p.value().rank() > 2) {
      throw ShapeError("concat: operand " + shape_string(p.value().shape()) + " does not have " +
                       std::to_string(m) + " rows");
    }
    widths.push_back(p.value().cols());
    ids.push_back(p.id);
    total += widths.back();
  }
  Tensor out(Shape{m, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(&v[i * widths[k]], widths[k], &out[i * total + off]);
    off += widths[k];
  }
  return g.record(std::move(out), ids, [ids, widths, m, total](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (g.requires_grad(ids[k])) {
        Tensor& gk = g.grad(ids[k]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) gk[i * widths[k] + j] += go[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

// Embedding lookup: rows of table [r x n] at the given indices.
inline Var gather_rows(Var table, std::vector<std::size_t> index) {
  Graph& g = *table.graph;
  const Tensor& t = table.value();
  const std::size_t r = t.rows(), n = t.cols();
  if (index.empty()) throw ShapeError("gather_rows: empty index");
  Tensor out(Shape{index.size(), n});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= r) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " outside table " +
                       shape_string(t.shape()));
    }
    std::copy_n(&t[index[i] * n], n, &out[i * n]);
  }
  return g.record(std::move(out), {table.id}, [tid = table.id, index = std::move(index), n](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gt = g.grad(tid);
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) gt[index[i] * n + j] += go[i * n + j];
  });
}

// Column selection: x [m x n] -> [m x index.size()].
inline Var gather_cols(Var x, std::vector<std::size_t> index) {
  Graph& g = *x.graph;
  const Tensor& v = x.value();
  const std::size_t m = v.rows(), n = v.cols();
  if (index.empty()) throw ShapeError("gather_cols: empty index");
  const std::size_t w = index.size();
  Tensor out(Shape{m, w});
  for (std::size_t j = 0; j < w; ++j) {
    if (index[j] >= n) {
      throw ShapeError("gather_cols: column " + std::to_string(index[j]) + " outside " + shape_string(v.shape()));
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = v[i * n + index[j]];
  return g.record(std::move(out), {x.id}, [xid = x.id, index = std::move(index), m, n, w](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad(xid);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) gx[i * n + index[j]] += go[i * w + j];
  });
}

// Tiles a single row vector [1 x n] into [m x n].
inline Var repeat_rows(Var v, std::size_t m) {
  Graph& g = *v.graph;
  const Tensor& t = v.value();
  if (t.rows() != 1) throw ShapeError("repeat_rows: expected one row, got " + shape_string(t.shape()));
  const std::size_t n = t.cols();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) std::copy_n(&t[0], n, &out[i * n]);
  return g.record(std::move(out), {v.id}, [vid = v.id, m, n](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gv = g.grad(vid);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gv[j] += go[i * n + j];
  });
}

inline Var reshape(Var x, Shape shape) {
  Graph& g = *x.graph;
  return g.record(x.value().reshaped(std::move(shape)), {x.id}, [xid = x.id](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad(xid);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  });
}

}  // namespace revise::num
