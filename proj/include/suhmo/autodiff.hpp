#pragma once

// Tape-based reverse-mode differentiation over Tensor<T>.
//
// Nodes are appended to the tape in creation order, which is a topological
// order of the graph, so backward is a single reverse sweep. Backward matrix
// products go through Eigen maps; everything else is plain loops.

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "suhmo/params.hpp"
#include "suhmo/tensor.hpp"

namespace suhmo::ad {

template <class T>
class Graph;

template <class T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor<T>& value() const { return graph_->value(id_); }
  const Tensor<T>& grad() const { return graph_->grad(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

template <class T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() { nodes_.reserve(1024); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr); }

  // Leaf that receives a gradient but is not bound to a ParamSet.
  Var<T> variable(Tensor<T> value) { return push(std::move(value), true, nullptr); }

  // Leaf bound to `params[name]`. Repeated requests return the same node so
  // that gradients from every use accumulate in one place.
  Var<T> param(const ParamSet<T>& params, const std::string& name) {
    const auto key = std::make_pair(static_cast<const void*>(&params), name);
    if (auto it = param_ids_.find(key); it != param_ids_.end()) return Var<T>(this, it->second);
    const bool trainable = frozen_.count(&params) == 0;
    Var<T> v = push(params.get(name), trainable, nullptr);
    param_ids_.emplace(key, v.id());
    return v;
  }

  // Leaves of a frozen set enter the graph as constants.
  void freeze(const ParamSet<T>& params) { frozen_.insert(&params); }

  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
    return record_impl(std::move(value), parents.begin(), parents.end(), std::move(fn));
  }

  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn fn) {
    return record_impl(std::move(value), parents.begin(), parents.end(), std::move(fn));
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  // Gradient buffers are allocated zero-filled on first access.
  Tensor<T>& grad(std::size_t id) const {
    auto& n = nodes_[id];
    if (!n.grad_ready) {
      if (n.grad.shape() == n.value.shape()) {
        n.grad.fill(T{0});
      } else {
        n.grad = Tensor<T>(n.value.shape());
      }
      n.grad_ready = true;
    }
    return n.grad;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void zero_grad() {
    for (auto& n : nodes_) n.grad_ready = false;
  }

  void backward(Var<T> loss) {
    if (loss.value().size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    grad(loss.id())[0] += T{1};
    // Only nodes the loss depends on are visited.
    reached_.assign(nodes_.size(), 0);
    reached_[loss.id()] = 1;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      if (!reached_[i]) continue;
      for (auto p : nodes_[i].parents) reached_[p] = 1;
      if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
  }

  // True when the last backward pass reached node `id`.
  bool reached(std::size_t id) const { return id < reached_.size() && reached_[id]; }

  // Gradient for every leaf of `params`. Leaves the last backward pass did not
  // reach get zeros and are not marked touched.
  Gradients<T> gradients(const ParamSet<T>& params) const {
    Gradients<T> out;
    for (const auto& [name, leaf] : params) {
      const auto key = std::make_pair(static_cast<const void*>(&params), name);
      auto it = param_ids_.find(key);
      if (it != param_ids_.end() && nodes_[it->second].requires_grad && reached(it->second)) {
        out.grads.emplace(name, grad(it->second));
        out.touched.insert(name);
      } else {
        out.grads.emplace(name, Tensor<T>(leaf.shape()));
      }
    }
    return out;
  }

  Gradients<T> backward(Var<T> loss, const ParamSet<T>& params) {
    zero_grad();
    backward(loss);
    return gradients(params);
  }

 private:
  struct Node {
    Tensor<T> value;
    mutable Tensor<T> grad;
    mutable bool grad_ready = false;
    BackwardFn backward;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
  };

  template <class It>
  Var<T> record_impl(Tensor<T> value, It first, It last, BackwardFn fn) {
    bool needs = false;
    for (It p = first; p != last; ++p) needs = needs || requires_grad(p->id());
    if (!needs) return push(std::move(value), false, nullptr);
    Var<T> v = push(std::move(value), true, std::move(fn));
    for (It p = first; p != last; ++p)
      if (requires_grad(p->id())) nodes_.back().parents.push_back(p->id());
    return v;
  }

  Var<T> push(Tensor<T> value, bool requires_grad, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.backward = std::move(fn);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::map<std::pair<const void*, std::string>, std::size_t> param_ids_;
  std::set<const void*> frozen_;
  std::vector<char> reached_;
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapC = Eigen::Map<const RowMat<T>>;
template <class T>
using MapM = Eigen::Map<RowMat<T>>;

template <class T>
Graph<T>& graph_of(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.graph() != &b.graph()) throw std::invalid_argument(std::string(op) + ": operands from different graphs");
  return a.graph();
}

[[noreturn]] inline void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

enum class Broadcast { same, row };

inline Broadcast broadcast_mode(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::same;
  const std::size_t acols = a.empty() ? 1 : a.back();
  const std::size_t bcols = b.empty() ? 1 : b.back();
  if (numel(b) == bcols && bcols == acols && b.size() <= 2) return Broadcast::row;
  shape_mismatch(op, a, b);
}

// outer x mid x inner decomposition of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1, mid = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.mid = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

// out[m, n] = a[m, k] w[k, n]. Every output row goes through the same
// accumulation sequence, so a row's result never depends on its position in
// the batch (blocked GEMM kernels do not guarantee that).
template <class T>
void rowwise_product(const T* __restrict a, const T* __restrict w, T* __restrict out, std::size_t m, std::size_t k,
                     std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    T* __restrict o0 = out + i * n;
    T* __restrict o1 = o0 + n;
    T* __restrict o2 = o1 + n;
    T* __restrict o3 = o2 + n;
    std::fill(o0, o0 + 4 * n, T{0});
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T a0 = a[i * k + kk], a1 = a[(i + 1) * k + kk], a2 = a[(i + 2) * k + kk], a3 = a[(i + 3) * k + kk];
      const T* wr = w + kk * n;
      for (std::size_t j = 0; j < n; ++j) {
        o0[j] += a0 * wr[j];
        o1[j] += a1 * wr[j];
        o2[j] += a2 * wr[j];
        o3[j] += a3 * wr[j];
      }
    }
  }
  for (; i < m; ++i) {
    T* o = out + i * n;
    std::fill(o, o + n, T{0});
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = a[i * k + kk];
      const T* wr = w + kk * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * wr[j];
    }
  }
}

}  // namespace detail

// a[..., k] x w[k, n] -> [..., n]
template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& w) {
  auto& g = detail::graph_of(a, w, "matmul");
  const auto& av = a.value();
  const auto& wv = w.value();
  if (wv.rank() != 2 || av.rank() == 0 || av.cols() != wv.dim(0)) {
    detail::shape_mismatch("matmul", av.shape(), wv.shape());
  }
  const std::size_t m = av.rows(), k = av.cols(), n = wv.dim(1);
  Shape out_shape = av.shape();
  out_shape.back() = n;
  Tensor<T> out(out_shape);
  detail::rowwise_product(av.data(), wv.data(), out.data(), m, k, n);
  const std::size_t ia = a.id(), iw = w.id();
  return g.record(std::move(out), {a, w}, [ia, iw, m, k, n](Graph<T>& gr, std::size_t self) {
    detail::MapC<T> gc(gr.grad(self).data(), m, n);
    if (gr.requires_grad(ia)) {
      detail::MapM<T>(gr.grad(ia).data(), m, k).noalias() +=
          gc * detail::MapC<T>(gr.value(iw).data(), k, n).transpose();
    }
    if (gr.requires_grad(iw)) {
      detail::MapM<T>(gr.grad(iw).data(), k, n).noalias() +=
          detail::MapC<T>(gr.value(ia).data(), m, k).transpose() * gc;
    }
  });
}

// Batched product: a[B, m, k] x b[B, k, n] -> [B, m, n]; with transpose_b,
// b is [B, n, k] and used transposed.
template <class T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool transpose_b = false) {
  auto& g = detail::graph_of(a, b, "bmm");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) ||
      av.dim(2) != (transpose_b ? bv.dim(2) : bv.dim(1))) {
    detail::shape_mismatch("bmm", av.shape(), bv.shape());
  }
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2);
  const std::size_t n = transpose_b ? bv.dim(1) : bv.dim(2);
  Tensor<T> out(Shape{batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    detail::MapC<T> A(av.data() + i * m * k, m, k);
    auto C = detail::MapM<T>(out.data() + i * m * n, m, n);
    if (transpose_b) {
      C.noalias() = A * detail::MapC<T>(bv.data() + i * n * k, n, k).transpose();
    } else {
      C.noalias() = A * detail::MapC<T>(bv.data() + i * k * n, k, n);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b},
                  [ia, ib, batch, m, k, n, transpose_b](Graph<T>& gr, std::size_t self) {
                    for (std::size_t i = 0; i < batch; ++i) {
                      detail::MapC<T> gc(gr.grad(self).data() + i * m * n, m, n);
                      detail::MapC<T> A(gr.value(ia).data() + i * m * k, m, k);
                      if (transpose_b) {
                        detail::MapC<T> Bt(gr.value(ib).data() + i * n * k, n, k);
                        if (gr.requires_grad(ia))
                          detail::MapM<T>(gr.grad(ia).data() + i * m * k, m, k).noalias() += gc * Bt;
                        if (gr.requires_grad(ib))
                          detail::MapM<T>(gr.grad(ib).data() + i * n * k, n, k).noalias() +=
                              gc.transpose() * A;
                      } else {
                        detail::MapC<T> B(gr.value(ib).data() + i * k * n, k, n);
                        if (gr.requires_grad(ia))
                          detail::MapM<T>(gr.grad(ia).data() + i * m * k, m, k).noalias() +=
                              gc * B.transpose();
                        if (gr.requires_grad(ib))
                          detail::MapM<T>(gr.grad(ib).data() + i * k * n, k, n).noalias() +=
                              A.transpose() * gc;
                      }
                    }
                  });
}

namespace detail {

// Shared driver for add / sub / mul with optional row broadcast of b.
template <class T, class Fwd, class DA, class DB>
Var<T> binary(const char* op, const Var<T>& a, const Var<T>& b, Fwd fwd, DA da, DB db) {
  auto& g = graph_of(a, b, op);
  const auto& av = a.value();
  const auto& bv = b.value();
  const Broadcast mode = broadcast_mode(op, av.shape(), bv.shape());
  const std::size_t n = av.size(), c = av.cols();
  const std::size_t rows = mode == Broadcast::same ? 1 : n / c, width = mode == Broadcast::same ? n : c;
  Tensor<T> out(av.shape());
  {
    const T* x = av.data();
    const T* y = bv.data();
    T* o = out.data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < width; ++j) o[r * width + j] = fwd(x[r * width + j], y[j]);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib, rows, width, da, db](Graph<T>& gr, std::size_t self) {
    const T* go = gr.grad(self).data();
    const T* x = gr.value(ia).data();
    const T* y = gr.value(ib).data();
    if (gr.requires_grad(ia)) {
      T* gx = gr.grad(ia).data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < width; ++j) {
          const std::size_t i = r * width + j;
          gx[i] += go[i] * da(x[i], y[j]);
        }
    }
    if (gr.requires_grad(ib)) {
      T* gy = gr.grad(ib).data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < width; ++j) {
          const std::size_t i = r * width + j;
          gy[j] += go[i] * db(x[i], y[j]);
        }
    }
  });
}

template <class T, class Fwd, class Deriv>
Var<T> unary(const Var<T>& a, Fwd fwd, Deriv deriv) {
  auto& g = a.graph();
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, deriv](Graph<T>& gr, std::size_t self) {
    const std::size_t n = gr.value(ia).size();
    const T* go = gr.grad(self).data();
    const T* x = gr.value(ia).data();
    const T* y = gr.value(self).data();
    T* gi = gr.grad(ia).data();
    for (std::size_t i = 0; i < n; ++i) gi[i] += go[i] * deriv(x[i], y[i]);
  });
}

}  // namespace detail

// Elementwise sum; b may also be a row vector broadcast over a's rows.
template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return detail::binary(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{1}; });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return detail::binary(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{-1}; });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return detail::binary(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

// Elementwise max. On ties the gradient goes to the first operand.
template <class T>
Var<T> maximum(const Var<T>& a, const Var<T>& b) {
  return detail::binary(
      "maximum", a, b, [](T x, T y) { return x >= y ? x : y; },
      [](T x, T y) { return x >= y ? T{1} : T{0}; },
      [](T x, T y) { return x >= y ? T{0} : T{1}; });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
  return detail::unary(a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <class T>
Var<T> shift(const Var<T>& a, T c) {
  return detail::unary(a, [c](T x) { return x + c; }, [](T, T) { return T{1}; });
}

template <class T>
Var<T> tanh(const Var<T>& a) {
  return detail::unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  return detail::unary(
      a, [](T x) { return T{1} / (T{1} + std::exp(-x)); }, [](T, T y) { return y * (T{1} - y); });
}

template <class T>
Var<T> relu(const Var<T>& a) {
  return detail::unary(
      a, [](T x) { return x > T{0} ? x : T{0}; }, [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <class T>
Var<T> sum(const Var<T>& a) {
  auto& g = a.graph();
  T s{0};
  for (T v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return g.record(Tensor<T>::scalar(s), {a}, [ia](Graph<T>& gr, std::size_t self) {
    const T go = gr.grad(self)[0];
    for (auto& v : gr.grad(ia).values()) v += go;
  });
}

template <class T>
Var<T> mean(const Var<T>& a) {
  auto& g = a.graph();
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty operand");
  T s{0};
  for (T v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return g.record(Tensor<T>::scalar(s / static_cast<T>(n)), {a}, [ia, n](Graph<T>& gr, std::size_t self) {
    const T go = gr.grad(self)[0] / static_cast<T>(n);
    for (auto& v : gr.grad(ia).values()) v += go;
  });
}

// Softmax over the last axis.
template <class T>
Var<T> softmax(const Var<T>& a) {
  auto& g = a.graph();
  const auto& av = a.value();
  const std::size_t rows = av.rows(), c = av.cols();
  Tensor<T> out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data() + r * c;
    T* y = out.data() + r * c;
    const T mx = *std::max_element(x, x + c);
    T z{0};
    for (std::size_t j = 0; j < c; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
  }
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, rows, c](Graph<T>& gr, std::size_t self) {
    const auto& y = gr.value(self);
    const auto& go = gr.grad(self);
    auto& gi = gr.grad(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot{0};
      for (std::size_t j = 0; j < c; ++j) dot += go[r * c + j] * y[r * c + j];
      for (std::size_t j = 0; j < c; ++j) gi[r * c + j] += y[r * c + j] * (go[r * c + j] - dot);
    }
  });
}

inline constexpr double kLayerNormEps = 1e-5;

// Normalizes each row (last axis) to zero mean and unit variance, no affine.
template <class T>
Var<T> layer_norm(const Var<T>& a) {
  auto& g = a.graph();
  const auto& av = a.value();
  const std::size_t rows = av.rows(), c = av.cols();
  Tensor<T> out(av.shape());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data() + r * c;
    T mu{0};
    for (std::size_t j = 0; j < c; ++j) mu += x[j];
    mu /= static_cast<T>(c);
    T var{0};
    for (std::size_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<T>(c);
    inv_std[r] = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEps));
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = (x[j] - mu) * inv_std[r];
  }
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, rows, c, inv_std = std::move(inv_std)](Graph<T>& gr, std::size_t self) {
    const auto& y = gr.value(self);
    const auto& go = gr.grad(self);
    auto& gi = gr.grad(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      T mg{0}, mgy{0};
      for (std::size_t j = 0; j < c; ++j) {
        mg += go[r * c + j];
        mgy += go[r * c + j] * y[r * c + j];
      }
      mg /= static_cast<T>(c);
      mgy /= static_cast<T>(c);
      for (std::size_t j = 0; j < c; ++j) {
        gi[r * c + j] += inv_std[r] * (go[r * c + j] - mg - y[r * c + j] * mgy);
      }
    }
  });
}

// Concatenation along `axis`; all other dimensions must agree.
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  auto& g = parts.front().graph();
  const Shape& s0 = parts.front().shape();
  if (axis >= s0.size()) throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(s0));
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size() && &p.graph() == &g;
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) detail::shape_mismatch("concat", s0, s);
    out_shape[axis] += s[axis];
  }
  const auto split = detail::split_axis(out_shape, axis);
  Tensor<T> out(out_shape);
  std::vector<std::size_t> ids, widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis] * split.inner;
    const auto& pv = p.value();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(pv.data() + o * w, w, out.data() + o * split.mid * split.inner + offset);
    }
    offset += w;
    ids.push_back(p.id());
    widths.push_back(w);
  }
  const std::size_t row = split.mid * split.inner, outer = split.outer;
  return g.record(std::move(out), parts, [ids, widths, row, outer](Graph<T>& gr, std::size_t self) {
    const auto& go = gr.grad(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (gr.requires_grad(ids[p])) {
        auto& gi = gr.grad(ids[p]);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < widths[p]; ++j) gi[o * widths[p] + j] += go[o * row + off + j];
      }
      off += widths[p];
    }
  });
}

// Elements [begin, end) along `axis`.
template <class T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t begin, std::size_t end) {
  auto& g = a.graph();
  const Shape& s = a.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " of " + shape_str(s));
  }
  const auto split = detail::split_axis(s, axis);
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  Tensor<T> out(out_shape);
  const std::size_t w = (end - begin) * split.inner, row = split.mid * split.inner, off = begin * split.inner;
  const auto& av = a.value();
  for (std::size_t o = 0; o < split.outer; ++o) std::copy_n(av.data() + o * row + off, w, out.data() + o * w);
  const std::size_t ia = a.id(), outer = split.outer;
  return g.record(std::move(out), {a}, [ia, w, row, off, outer](Graph<T>& gr, std::size_t self) {
    const auto& go = gr.grad(self);
    auto& gi = gr.grad(ia);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < w; ++j) gi[o * row + off + j] += go[o * w + j];
  });
}

// Selects entries of the leading axis: out[i] = a[indices[i]].
template <class T>
Var<T> gather(const Var<T>& a, const std::vector<std::size_t>& indices) {
  auto& g = a.graph();
  const Shape& s = a.shape();
  if (s.empty()) throw ShapeError("gather: scalar operand");
  const std::size_t block = numel(s) / s[0];
  for (std::size_t i : indices) {
    if (i >= s[0]) throw ShapeError("gather: index " + std::to_string(i) + " out of range for " + shape_str(s));
  }
  Shape out_shape = s;
  out_shape[0] = indices.size();
  Tensor<T> out(out_shape);
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(a.value().data() + indices[r] * block, block, out.data() + r * block);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, indices, block](Graph<T>& gr, std::size_t self) {
    const auto& go = gr.grad(self);
    auto& gi = gr.grad(ia);
    for (std::size_t r = 0; r < indices.size(); ++r)
      for (std::size_t j = 0; j < block; ++j) gi[indices[r] * block + j] += go[r * block + j];
  });
}

template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  auto& g = a.graph();
  Tensor<T> out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia](Graph<T>& gr, std::size_t self) {
    const auto& go = gr.grad(self);
    auto& gi = gr.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
  });
}

template <class T>
Var<T> square(const Var<T>& a) {
  return mul(a, a);
}

template <class T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  return mean(square(sub(a, b)));
}

}  // namespace suhmo::ad
