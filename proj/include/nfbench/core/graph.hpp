#pragma once

// Reverse-mode automatic differentiation over a per-pass tape.
//
// A Graph records one forward pass as an append-only list of nodes, so node
// creation order is already a topological order. backward() marks the
// ancestors of the loss and replays closures in reverse creation order,
// visiting each node exactly once. Parameter leaves alias external
// value/grad storage (see param_store.hpp), so gradients accumulate across
// graphs until the optimizer clears them.
//
// One graph is single-writer: do not interleave forward recording with
// backward traversal. Independent graphs over read-only parameter values
// may run in parallel.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "nfbench/core/tensor.hpp"

namespace nfbench {

template <typename T>
class Graph;

template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Shape& shape() const { return graph->shape(id); }
  std::size_t size() const { return shape_numel(shape()); }
  const T* data() const { return graph->vals(id); }
  T value(std::size_t i = 0) const { return graph->vals(id)[i]; }
  Tensor<T> tensor() const {
    return Tensor<T>(shape(), std::vector<T>(data(), data() + size()));
  }
};

template <typename T>
class Graph {
 public:
  using BackFn = std::function<void(Graph<T>&, int)>;

  struct Node {
    Shape shape;
    std::vector<T> storage;     // owned values; empty when view-backed
    const T* vptr = nullptr;    // always valid after construction
    std::vector<T> gradbuf;     // owned grads, allocated during backward
    T* gext = nullptr;          // external grad sink (parameter leaves)
    std::vector<int> inputs;
    BackFn backward;
    bool requires_grad = false;
    const char* op = "leaf";
  };

  // When set, every node's values are scanned for NaN/Inf at creation and
  // gradients are scanned after each backward rule. Used by tests.
  bool check_finite = false;

  Var<T> constant(Tensor<T> t) {
    Node n;
    n.shape = t.shape();
    n.storage = std::move(t.values());
    n.vptr = n.storage.data();
    return push(std::move(n), "const");
  }

  // Caller guarantees `data` outlives the graph.
  Var<T> constant_view(const T* data, Shape shape) {
    Node n;
    n.shape = std::move(shape);
    n.vptr = data;
    return push(std::move(n), "const");
  }

  // Differentiable leaf aliasing external parameter storage. Gradients are
  // accumulated into `grad_sink`, which must stay alive and zero-initialized
  // by its owner.
  Var<T> leaf(const T* values, T* grad_sink, Shape shape) {
    Node n;
    n.shape = std::move(shape);
    n.vptr = values;
    n.gext = grad_sink;
    n.requires_grad = true;
    return push(std::move(n), "param");
  }

  int add_op(Shape shape, std::vector<int> inputs, const char* op, BackFn fn) {
    Node n;
    n.shape = std::move(shape);
    n.storage.assign(shape_numel(n.shape), T(0));
    n.vptr = n.storage.data();
    n.inputs = std::move(inputs);
    for (int i : n.inputs)
      if (nodes_[i].requires_grad) n.requires_grad = true;
    if (n.requires_grad) n.backward = std::move(fn);
    n.op = op;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Shape& shape(int id) const { return nodes_[id].shape; }
  const T* vals(int id) const { return nodes_[id].vptr; }
  T* mutable_vals(int id) { return nodes_[id].storage.data(); }
  std::size_t numel(int id) const { return shape_numel(nodes_[id].shape); }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const char* op_name(int id) const { return nodes_[id].op; }

  // Valid during backward for nodes that participate; nullptr otherwise.
  T* grad(int id) {
    Node& n = nodes_[id];
    if (n.gext) return n.gext;
    return n.gradbuf.empty() ? nullptr : n.gradbuf.data();
  }

  std::size_t node_count() const { return nodes_.size(); }

  void finalize_value(int id) {
    if (check_finite) check_values(id);
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // reachable differentiable node. Unreachable parameters keep whatever is
  // already in their sink (zero if freshly cleared).
  void backward(const Var<T>& loss) {
    require(loss.graph == this, "backward: loss from another graph");
    require(shape_numel(nodes_[loss.id].shape) == 1,
            "backward: loss must be scalar, got " +
                shape_str(nodes_[loss.id].shape));

    if (!nodes_[loss.id].requires_grad) return;  // nothing differentiable below

    std::vector<char> visited(nodes_.size(), 0);
    std::vector<int> stack{loss.id};
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      if (visited[id] || !nodes_[id].requires_grad) continue;
      visited[id] = 1;
      for (int in : nodes_[id].inputs) stack.push_back(in);
    }

    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      Node& n = nodes_[id];
      if (visited[id] && !n.gext)
        n.gradbuf.assign(shape_numel(n.shape), T(0));
    }

    grad(loss.id)[0] += T(1);
    for (int id = loss.id; id >= 0; --id) {
      if (!visited[id] || !nodes_[id].backward) continue;
      nodes_[id].backward(*this, id);
      if (check_finite) check_grads(id);
    }
  }

 private:
  Var<T> push(Node&& n, const char* op) {
    n.op = op;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    if (check_finite) check_values(id);
    return Var<T>{this, id};
  }

  void check_values(int id) {
    const Node& n = nodes_[id];
    const T* v = n.vptr;
    for (std::size_t i = 0, e = shape_numel(n.shape); i < e; ++i)
      if (!std::isfinite(static_cast<double>(v[i])))
        fail(std::string("non-finite value in op '") + n.op + "'");
  }

  void check_grads(int id) {
    for (int in : nodes_[id].inputs) {
      const T* g = grad(in);
      if (!g) continue;
      for (std::size_t i = 0, e = numel(in); i < e; ++i)
        if (!std::isfinite(static_cast<double>(g[i])))
          fail(std::string("non-finite gradient flowing into input of '") +
               nodes_[id].op + "'");
    }
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// op helpers

namespace detail {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const EMat<T>>;
template <typename T>
using Map = Eigen::Map<EMat<T>>;

inline void same_graph(const void* a, const void* b, const char* op) {
  require(a == b, std::string(op) + ": operands from different graphs");
}

[[noreturn]] inline void shape_error(const char* op, const Shape& a,
                                     const Shape& b) {
  fail(std::string("shape mismatch in '") + op + "': " + shape_str(a) +
       " vs " + shape_str(b));
}

// Split a shape around `axis` into (outer, len, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, int axis) {
  require(axis >= 0 && axis < static_cast<int>(s.size()),
          "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

// Elementwise unary op with dy -> dx rule expressed on values.
template <typename T, typename FwdFn, typename BwdFn>
Var<T> unary_map(const Var<T>& x, const char* name, FwdFn fwd, BwdFn dfdx) {
  Graph<T>& g = *x.graph;
  int xid = x.id;
  std::size_t n = g.numel(xid);
  int id = g.add_op(g.shape(xid), {xid}, name,
                    [xid, n, dfdx](Graph<T>& gg, int self) {
                      T* gx = gg.grad(xid);
                      if (!gx) return;
                      const T* xv = gg.vals(xid);
                      const T* yv = gg.vals(self);
                      const T* gy = gg.grad(self);
                      for (std::size_t i = 0; i < n; ++i)
                        gx[i] += gy[i] * dfdx(xv[i], yv[i]);
                    });
  const T* xv = g.vals(xid);
  T* out = g.mutable_vals(id);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(xv[i]);
  g.finalize_value(id);
  return Var<T>{&g, id};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ops

// [M,K] x [K,N] -> [M,N]
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::same_graph(a.graph, b.graph, "matmul");
  Graph<T>& g = *a.graph;
  const Shape& sa = g.shape(a.id);
  const Shape& sb = g.shape(b.id);
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    detail::shape_error("matmul", sa, sb);
  const int M = sa[0], K = sa[1], N = sb[1];
  int aid = a.id, bid = b.id;
  int id = g.add_op(
      {M, N}, {aid, bid}, "matmul", [aid, bid, M, K, N](Graph<T>& gg, int self) {
        detail::MapC<T> A(gg.vals(aid), M, K), B(gg.vals(bid), K, N);
        detail::MapC<T> dC(gg.grad(self), M, N);
        if (T* ga = gg.grad(aid))
          detail::Map<T>(ga, M, K).noalias() += dC * B.transpose();
        if (T* gb = gg.grad(bid))
          detail::Map<T>(gb, K, N).noalias() += A.transpose() * dC;
      });
  detail::Map<T>(g.mutable_vals(id), M, N).noalias() =
      detail::MapC<T>(g.vals(aid), M, K) * detail::MapC<T>(g.vals(bid), K, N);
  g.finalize_value(id);
  return Var<T>{&g, id};
}

namespace detail {

enum class EwKind { kAdd, kSub, kMul };

// Elementwise binary with optional row broadcast: b of shape [C] applies to
// every leading slice of a with trailing extent C.
template <typename T>
Var<T> ew_binary(const Var<T>& a, const Var<T>& b, EwKind kind, const char* name) {
  same_graph(a.graph, b.graph, name);
  Graph<T>& g = *a.graph;
  const Shape& sa = g.shape(a.id);
  const Shape& sb = g.shape(b.id);
  bool same = sa == sb;
  bool rowwise = !same && sb.size() == 1 && !sa.empty() && sa.back() == sb[0];
  if (!same && !rowwise) shape_error(name, sa, sb);

  int aid = a.id, bid = b.id;
  std::size_t n = g.numel(aid);
  std::size_t c = rowwise ? static_cast<std::size_t>(sb[0]) : n;

  int id = g.add_op(
      sa, {aid, bid}, name, [aid, bid, kind, n, c, rowwise](Graph<T>& gg, int self) {
        const T* gy = gg.grad(self);
        const T* av = gg.vals(aid);
        const T* bv = gg.vals(bid);
        T* ga = gg.grad(aid);
        T* gb = gg.grad(bid);
        switch (kind) {
          case EwKind::kAdd:
            if (ga)
              for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i];
            if (gb)
              for (std::size_t i = 0; i < n; ++i) gb[rowwise ? i % c : i] += gy[i];
            break;
          case EwKind::kSub:
            if (ga)
              for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i];
            if (gb)
              for (std::size_t i = 0; i < n; ++i) gb[rowwise ? i % c : i] -= gy[i];
            break;
          case EwKind::kMul:
            if (ga)
              for (std::size_t i = 0; i < n; ++i)
                ga[i] += gy[i] * bv[rowwise ? i % c : i];
            if (gb)
              for (std::size_t i = 0; i < n; ++i)
                gb[rowwise ? i % c : i] += gy[i] * av[i];
            break;
        }
      });
  const T* av = g.vals(aid);
  const T* bv = g.vals(bid);
  T* out = g.mutable_vals(id);
  for (std::size_t i = 0; i < n; ++i) {
    T bvi = bv[rowwise ? i % c : i];
    out[i] = kind == EwKind::kAdd   ? av[i] + bvi
             : kind == EwKind::kSub ? av[i] - bvi
                                    : av[i] * bvi;
  }
  g.finalize_value(id);
  return Var<T>{&g, id};
}

}  // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return detail::ew_binary(a, b, detail::EwKind::kAdd, "add");
}
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return detail::ew_binary(a, b, detail::EwKind::kSub, "sub");
}
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return detail::ew_binary(a, b, detail::EwKind::kMul, "mul");
}

template <typename T>
Var<T> scale(const Var<T>& x, T c) {
  return detail::unary_map(
      x, "scale", [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return detail::unary_map(
      x, "relu", [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sine(const Var<T>& x) {
  return detail::unary_map(
      x, "sin", [](T v) { return std::sin(v); },
      [](T v, T) { return std::cos(v); });
}

template <typename T>
Var<T> cosine(const Var<T>& x) {
  return detail::unary_map(
      x, "cos", [](T v) { return std::cos(v); },
      [](T v, T) { return -std::sin(v); });
}

template <typename T>
Var<T> vexp(const Var<T>& x) {
  return detail::unary_map(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary_map(
      x, "sigmoid",
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> softplus(const Var<T>& x) {
  return detail::unary_map(
      x, "softplus",
      [](T v) {
        return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v)));
      },
      [](T v, T) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      });
}

template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
  Graph<T>& g = *x.graph;
  auto ax = detail::split_axis(g.shape(x.id), axis);
  int xid = x.id;
  int id = g.add_op(
      g.shape(xid), {xid}, "softmax", [xid, ax](Graph<T>& gg, int self) {
        T* gx = gg.grad(xid);
        if (!gx) return;
        const T* y = gg.vals(self);
        const T* gy = gg.grad(self);
        for (std::size_t o = 0; o < ax.outer; ++o)
          for (std::size_t in = 0; in < ax.inner; ++in) {
            std::size_t base = o * ax.len * ax.inner + in;
            T dot = T(0);
            for (std::size_t l = 0; l < ax.len; ++l) {
              std::size_t k = base + l * ax.inner;
              dot += gy[k] * y[k];
            }
            for (std::size_t l = 0; l < ax.len; ++l) {
              std::size_t k = base + l * ax.inner;
              gx[k] += y[k] * (gy[k] - dot);
            }
          }
      });
  const T* xv = g.vals(xid);
  T* out = g.mutable_vals(id);
  for (std::size_t o = 0; o < ax.outer; ++o)
    for (std::size_t in = 0; in < ax.inner; ++in) {
      std::size_t base = o * ax.len * ax.inner + in;
      T m = xv[base];
      for (std::size_t l = 1; l < ax.len; ++l)
        m = std::max(m, xv[base + l * ax.inner]);
      T sum = T(0);
      for (std::size_t l = 0; l < ax.len; ++l) {
        std::size_t k = base + l * ax.inner;
        out[k] = std::exp(xv[k] - m);
        sum += out[k];
      }
      T inv = T(1) / sum;
      for (std::size_t l = 0; l < ax.len; ++l) out[base + l * ax.inner] *= inv;
    }
  g.finalize_value(id);
  return Var<T>{&g, id};
}

// Normalizes over the last axis: y = (x - mean) / sqrt(var + eps). No learned
// affine; compose with mul/add against parameter vectors where needed.
template <typename T>
Var<T> layer_norm(const Var<T>& x, T eps = T(1e-5)) {
  Graph<T>& g = *x.graph;
  const Shape& s = g.shape(x.id);
  require(!s.empty(), "layer_norm: scalar input");
  std::size_t c = s.back();
  std::size_t rows = shape_numel(s) / c;
  int xid = x.id;
  int id = g.add_op(
      s, {xid}, "layer_norm", [xid, c, rows, eps](Graph<T>& gg, int self) {
        T* gx = gg.grad(xid);
        if (!gx) return;
        const T* xv = gg.vals(xid);
        const T* y = gg.vals(self);
        const T* gy = gg.grad(self);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* xr = xv + r * c;
          const T* yr = y + r * c;
          const T* gr = gy + r * c;
          T mu = T(0), var = T(0);
          for (std::size_t i = 0; i < c; ++i) mu += xr[i];
          mu /= T(c);
          for (std::size_t i = 0; i < c; ++i) var += (xr[i] - mu) * (xr[i] - mu);
          var /= T(c);
          T inv = T(1) / std::sqrt(var + eps);
          T gmean = T(0), gydot = T(0);
          for (std::size_t i = 0; i < c; ++i) {
            gmean += gr[i];
            gydot += gr[i] * yr[i];
          }
          gmean /= T(c);
          gydot /= T(c);
          T* gxr = gx + r * c;
          for (std::size_t i = 0; i < c; ++i)
            gxr[i] += inv * (gr[i] - gmean - yr[i] * gydot);
        }
      });
  const T* xv = g.vals(xid);
  T* out = g.mutable_vals(id);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv + r * c;
    T* yr = out + r * c;
    T mu = T(0), var = T(0);
    for (std::size_t i = 0; i < c; ++i) mu += xr[i];
    mu /= T(c);
    for (std::size_t i = 0; i < c; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= T(c);
    T inv = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < c; ++i) yr[i] = (xr[i] - mu) * inv;
  }
  g.finalize_value(id);
  return Var<T>{&g, id};
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
  require(!xs.empty(), "concat: no inputs");
  Graph<T>& g = *xs[0].graph;
  Shape out_shape = g.shape(xs[0].id);
  require(axis >= 0 && axis < static_cast<int>(out_shape.size()),
          "concat: axis out of range");
  std::vector<int> ids;
  int total = 0;
  for (const Var<T>& v : xs) {
    detail::same_graph(v.graph, &g, "concat");
    const Shape& s = g.shape(v.id);
    if (s.size() != out_shape.size()) detail::shape_error("concat", out_shape, s);
    for (std::size_t d = 0; d < s.size(); ++d)
      if (static_cast<int>(d) != axis && s[d] != out_shape[d])
        detail::shape_error("concat", out_shape, s);
    total += s[axis];
    ids.push_back(v.id);
  }
  out_shape[axis] = total;
  auto ax = detail::split_axis(out_shape, axis);

  std::vector<std::size_t> lens, offsets;
  std::size_t off = 0;
  for (int idn : ids) {
    std::size_t l = g.shape(idn)[axis];
    lens.push_back(l);
    offsets.push_back(off);
    off += l;
  }

  int id = g.add_op(
      out_shape, ids, "concat",
      [ids, lens, offsets, ax](Graph<T>& gg, int self) {
        const T* gy = gg.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          T* gi = gg.grad(ids[k]);
          if (!gi) continue;
          for (std::size_t o = 0; o < ax.outer; ++o) {
            const T* src = gy + (o * ax.len + offsets[k]) * ax.inner;
            T* dst = gi + o * lens[k] * ax.inner;
            for (std::size_t e = 0, ne = lens[k] * ax.inner; e < ne; ++e)
              dst[e] += src[e];
          }
        }
      });
  T* out = g.mutable_vals(id);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const T* src = g.vals(ids[k]);
    for (std::size_t o = 0; o < ax.outer; ++o)
      std::memcpy(out + (o * ax.len + offsets[k]) * ax.inner,
                  src + o * lens[k] * ax.inner,
                  lens[k] * ax.inner * sizeof(T));
  }
  g.finalize_value(id);
  return Var<T>{&g, id};
}

template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b, int axis) {
  return concat(std::vector<Var<T>>{a, b}, axis);
}

template <typename T>
Var<T> slice(const Var<T>& x, int axis, int start, int len) {
  Graph<T>& g = *x.graph;
  Shape s = g.shape(x.id);
  auto ax = detail::split_axis(s, axis);
  require(start >= 0 && len > 0 && start + len <= static_cast<int>(ax.len),
          "slice: range [" + std::to_string(start) + "," +
              std::to_string(start + len) + ") out of bounds for " +
              shape_str(s));
  Shape out_shape = s;
  out_shape[axis] = len;
  int xid = x.id;
  std::size_t ulen = len, ustart = start;
  int id = g.add_op(
      out_shape, {xid}, "slice",
      [xid, ax, ulen, ustart](Graph<T>& gg, int self) {
        T* gx = gg.grad(xid);
        if (!gx) return;
        const T* gy = gg.grad(self);
        for (std::size_t o = 0; o < ax.outer; ++o) {
          T* dst = gx + (o * ax.len + ustart) * ax.inner;
          const T* src = gy + o * ulen * ax.inner;
          for (std::size_t e = 0, ne = ulen * ax.inner; e < ne; ++e)
            dst[e] += src[e];
        }
      });
  T* out = g.mutable_vals(id);
  const T* xv = g.vals(xid);
  for (std::size_t o = 0; o < ax.outer; ++o)
    std::memcpy(out + o * ulen * ax.inner,
                xv + (o * ax.len + ustart) * ax.inner,
                ulen * ax.inner * sizeof(T));
  g.finalize_value(id);
  return Var<T>{&g, id};
}

template <typename T>
Var<T> transpose(const Var<T>& x) {
  Graph<T>& g = *x.graph;
  const Shape& s = g.shape(x.id);
  require(s.size() == 2, "transpose: rank-2 only, got " + shape_str(s));
  const int R = s[0], C = s[1];
  int xid = x.id;
  int id = g.add_op({C, R}, {xid}, "transpose", [xid, R, C](Graph<T>& gg, int self) {
    T* gx = gg.grad(xid);
    if (!gx) return;
    const T* gy = gg.grad(self);
    detail::Map<T>(gx, R, C) += detail::MapC<T>(gy, C, R).transpose();
  });
  detail::Map<T>(g.mutable_vals(id), C, R) =
      detail::MapC<T>(g.vals(xid), R, C).transpose();
  g.finalize_value(id);
  return Var<T>{&g, id};
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape new_shape) {
  Graph<T>& g = *x.graph;
  require(shape_numel(new_shape) == g.numel(x.id),
          "reshape: " + shape_str(g.shape(x.id)) + " -> " +
              shape_str(new_shape) + " changes element count");
  int xid = x.id;
  std::size_t n = g.numel(xid);
  int id = g.add_op(std::move(new_shape), {xid}, "reshape",
                    [xid, n](Graph<T>& gg, int self) {
                      T* gx = gg.grad(xid);
                      if (!gx) return;
                      const T* gy = gg.grad(self);
                      for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i];
                    });
  std::memcpy(g.mutable_vals(id), g.vals(xid), n * sizeof(T));
  g.finalize_value(id);
  return Var<T>{&g, id};
}

template <typename T>
Var<T> reduce_sum(const Var<T>& x) {
  Graph<T>& g = *x.graph;
  int xid = x.id;
  std::size_t n = g.numel(xid);
  int id = g.add_op({1}, {xid}, "sum", [xid, n](Graph<T>& gg, int self) {
    T* gx = gg.grad(xid);
    if (!gx) return;
    T gy = gg.grad(self)[0];
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy;
  });
  const T* xv = g.vals(xid);
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += xv[i];
  g.mutable_vals(id)[0] = acc;
  g.finalize_value(id);
  return Var<T>{&g, id};
}

template <typename T>
Var<T> reduce_mean(const Var<T>& x) {
  Graph<T>& g = *x.graph;
  std::size_t n = g.numel(x.id);
  return scale(reduce_sum(x), T(1) / T(n));
}

// Row gather with zero-fill: rows[k] = x[idx[k]] for idx[k] >= 0, else zeros.
// Negative indices make zero-padded im2col and boundary handling one op.
template <typename T>
Var<T> gather_rows(const Var<T>& x, std::vector<int> idx) {
  Graph<T>& g = *x.graph;
  const Shape& s = g.shape(x.id);
  require(s.size() == 2, "gather_rows: rank-2 source, got " + shape_str(s));
  const int R = s[0];
  const std::size_t C = s[1];
  for (int i : idx)
    require(i < R, "gather_rows: index " + std::to_string(i) +
                       " out of range for " + shape_str(s));
  int xid = x.id;
  int K = static_cast<int>(idx.size());
  int id = g.add_op(
      {K, static_cast<int>(C)}, {xid}, "gather_rows",
      [xid, idx, C](Graph<T>& gg, int self) {
        T* gx = gg.grad(xid);
        if (!gx) return;
        const T* gy = gg.grad(self);
        for (std::size_t k = 0; k < idx.size(); ++k) {
          if (idx[k] < 0) continue;
          T* dst = gx + static_cast<std::size_t>(idx[k]) * C;
          const T* src = gy + k * C;
          for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
        }
      });
  T* out = g.mutable_vals(id);
  const T* xv = g.vals(xid);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0)
      std::memset(out + k * C, 0, C * sizeof(T));
    else
      std::memcpy(out + k * C, xv + static_cast<std::size_t>(idx[k]) * C,
                  C * sizeof(T));
  }
  g.finalize_value(id);
  return Var<T>{&g, id};
}

// ---------------------------------------------------------------------------
// volume rendering quadrature (fused op; see render/ for the sampling side)
//
//   alpha_i = 1 - exp(-sigma_i * delta_i)
//   T_i     = exp(-sum_{j<i} sigma_j delta_j)
//   C       = sum_i T_i alpha_i c_i + T_end * background
//
// sigma: [R,S], color: [R,S,3], delta: [R,S] (constant), background: [3].

template <typename T>
Var<T> composite(const Var<T>& sigma, const Var<T>& color,
                 const Tensor<T>& delta, const std::array<T, 3>& background) {
  detail::same_graph(sigma.graph, color.graph, "composite");
  Graph<T>& g = *sigma.graph;
  const Shape& ss = g.shape(sigma.id);
  const Shape& sc = g.shape(color.id);
  require(ss.size() == 2, "composite: sigma must be [rays,samples], got " +
                              shape_str(ss));
  if (sc.size() != 3 || sc[0] != ss[0] || sc[1] != ss[1] || sc[2] != 3)
    detail::shape_error("composite", ss, sc);
  require(delta.shape() == ss, "composite: delta shape " +
                                   shape_str(delta.shape()) +
                                   " != sigma shape " + shape_str(ss));
  const int R = ss[0], S = ss[1];
  int sid = sigma.id, cid = color.id;

  auto scan = [R, S](const T* sv, const T* cv, const T* dv,
                     const std::array<T, 3>& bg, T* out, Graph<T>* gg,
                     int sid2, int cid2, const T* gy) {
    for (int r = 0; r < R; ++r) {
      const T* srow = sv + static_cast<std::size_t>(r) * S;
      const T* crow = cv + static_cast<std::size_t>(r) * S * 3;
      const T* drow = dv + static_cast<std::size_t>(r) * S;
      if (!gg) {
        T trans = T(1);
        T acc[3] = {T(0), T(0), T(0)};
        for (int i = 0; i < S; ++i) {
          T a = T(1) - std::exp(-srow[i] * drow[i]);
          T w = trans * a;
          for (int ch = 0; ch < 3; ++ch) acc[ch] += w * crow[i * 3 + ch];
          trans *= T(1) - a;
        }
        for (int ch = 0; ch < 3; ++ch)
          out[r * 3 + ch] = acc[ch] + trans * bg[ch];
        continue;
      }
      // backward: recompute transmittances, then reverse-scan suffix sums
      std::vector<T> trans(S + 1);
      std::vector<T> alpha(S);
      trans[0] = T(1);
      for (int i = 0; i < S; ++i) {
        alpha[i] = T(1) - std::exp(-srow[i] * drow[i]);
        trans[i + 1] = trans[i] * (T(1) - alpha[i]);
      }
      const T* gout = gy + static_cast<std::size_t>(r) * 3;
      T* gs = gg->grad(sid2);
      T* gc = gg->grad(cid2);
      T suffix[3] = {trans[S] * bg[0], trans[S] * bg[1], trans[S] * bg[2]};
      for (int i = S - 1; i >= 0; --i) {
        T w = trans[i] * alpha[i];
        if (gc) {
          T* gcrow = gc + (static_cast<std::size_t>(r) * S + i) * 3;
          for (int ch = 0; ch < 3; ++ch) gcrow[ch] += w * gout[ch];
        }
        if (gs) {
          T d = T(0);
          for (int ch = 0; ch < 3; ++ch)
            d += gout[ch] *
                 (trans[i] * (T(1) - alpha[i]) * crow[i * 3 + ch] - suffix[ch]);
          gs[static_cast<std::size_t>(r) * S + i] += drow[i] * d;
        }
        for (int ch = 0; ch < 3; ++ch) suffix[ch] += w * crow[i * 3 + ch];
      }
    }
  };

  Tensor<T> delta_copy = delta;
  int id = g.add_op(
      {R, 3}, {sid, cid}, "composite",
      [sid, cid, delta_copy, background, scan](Graph<T>& gg, int self) {
        scan(gg.vals(sid), gg.vals(cid), delta_copy.data(), background,
             nullptr, &gg, sid, cid, gg.grad(self));
      });
  scan(g.vals(sid), g.vals(cid), delta.data(), background, g.mutable_vals(id),
       nullptr, 0, 0, nullptr);
  g.finalize_value(id);
  return Var<T>{&g, id};
}

// Non-differentiating companion: per-sample compositing weights T_i*alpha_i
// and final transmittance, used to build the importance PDF from a coarse
// pass without tracking gradients.
template <typename T>
void composite_weights(const Tensor<T>& sigma, const Tensor<T>& delta,
                       Tensor<T>& weights, std::vector<T>& final_trans) {
  require(sigma.shape() == delta.shape(), "composite_weights: shape mismatch");
  const int R = sigma.rows(), S = sigma.cols();
  weights = Tensor<T>({R, S});
  final_trans.assign(R, T(1));
  for (int r = 0; r < R; ++r) {
    T trans = T(1);
    for (int i = 0; i < S; ++i) {
      T a = T(1) - std::exp(-sigma.at(r, i) * delta.at(r, i));
      weights.at(r, i) = trans * a;
      trans *= T(1) - a;
    }
    final_trans[r] = trans;
  }
}

// mean((a-b)^2) composed from primitives
template <typename T>
Var<T> mse(const Var<T>& pred, const Var<T>& target) {
  Var<T> d = sub(pred, target);
  return reduce_mean(mul(d, d));
}

}  // namespace nfbench
