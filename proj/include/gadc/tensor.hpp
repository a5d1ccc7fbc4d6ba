// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dense tensor with reverse-mode differentiation. Values are immutable once
// an op has consumed them; each op records its parents and a pull-style
// backward closure on a tape ordered by creation sequence.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "gadc/common.hpp"

namespace gadc {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ")";
  return os.str();
}

inline std::uint64_t next_node_seq() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

// Suspends tape recording on this thread for its lifetime (evaluation loops).
struct NoGradGuard {
  NoGradGuard() : prev_(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
class Tensor {
 public:
  struct Node;
  using NodePtr = std::shared_ptr<Node>;

  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated lazily during backward
    bool requires_grad = false;
    std::uint64_t seq = 0;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
      if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
  };

  Tensor() = default;

  Tensor(Shape shape, T fill) {
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->value.assign(shape_numel(node_->shape), fill);
    node_->seq = next_node_seq();
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }

  static Tensor from_data(Shape shape, std::vector<T> data) {
    if (shape_numel(shape) != data.size())
      throw input_error("tensor data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    t.node_->seq = next_node_seq();
    return t;
  }

  static Tensor scalar(T v) { return from_data({1}, {v}); }

  static Tensor make_op(Shape shape, std::vector<T> value,
                        std::vector<NodePtr> parents,
                        std::function<void(Node&)> backward) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(value);
    t.node_->seq = next_node_seq();
    bool needs = false;
    if (grad_mode_flag())
      for (const auto& p : parents)
        if (p && p->requires_grad) needs = true;
    if (needs) {
      t.node_->requires_grad = true;
      t.node_->parents = std::move(parents);
      t.node_->backward = std::move(backward);
    }
    if (finite_checks_enabled()) t.check_finite("op output");
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t numel() const { return node_->value.size(); }

  const std::vector<T>& vals() const { return node_->value; }
  // Leaf mutation only (optimizer updates, test setup); mutating a tensor
  // that already has consumers invalidates any recorded graph.
  std::vector<T>& vals_mut() { return node_->value; }

  T item() const {
    if (numel() != 1) throw input_error("item() on non-scalar tensor");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }

  Tensor& set_requires_grad(bool on = true) {
    node_->requires_grad = on;
    return *this;
  }

  const std::vector<T>& grad() const { return node_->grad; }

  void zero_grad() { node_->grad.clear(); }

  NodePtr node() const { return node_; }

  void check_finite(const char* what) const {
    for (const T v : node_->value)
      if (!std::isfinite(static_cast<double>(v)))
        throw numeric_error(std::string("non-finite value in ") + what);
  }

  // Reverse pass from a scalar. Visits each reachable node exactly once in
  // reverse creation order; fan-out accumulates additively.
  void backward() {
    if (numel() != 1) throw input_error("backward() requires a scalar loss");
    if (!node_->requires_grad)
      throw input_error("backward() on a graph with no gradient-tracked leaves");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
      Node* n = stack.back();
      stack.pop_back();
      order.push_back(n);
      for (const auto& p : n->parents) {
        if (p && p->requires_grad && !seen.count(p.get())) {
          seen.insert(p.get());
          stack.push_back(p.get());
        }
      }
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->seq > b->seq; });
    node_->ensure_grad();
    node_->grad[0] = T(1);
    for (Node* n : order) {
      if (n->backward) {
        n->ensure_grad();
        n->backward(*n);
      }
    }
  }

  Tensor detach() const {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = node_->shape;
    t.node_->value = node_->value;
    t.node_->seq = next_node_seq();
    return t;
  }

  Tensor reshape(Shape s) const {
    if (shape_numel(s) != numel())
      throw input_error("reshape to incompatible shape " + shape_str(s));
    return make_op(std::move(s), node_->value, {node_},
                   [](Node& n) {
                     Node* p = n.parents[0].get();
                     if (!p->requires_grad) return;
                     p->ensure_grad();
                     for (std::size_t i = 0; i < n.grad.size(); ++i)
                       p->grad[i] += n.grad[i];
                   });
  }

 private:
  NodePtr node_;
};

namespace ops {

template <typename T>
void accumulate(typename Tensor<T>::Node* p, const std::vector<T>& g) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw input_error(std::string(op) + ": shape mismatch " +
                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  const auto& av = a.vals();
  const auto& bv = b.vals();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a.node(), b.node()},
                            [](typename Tensor<T>::Node& n) {
                              accumulate<T>(n.parents[0].get(), n.grad);
                              accumulate<T>(n.parents[1].get(), n.grad);
                            });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  const auto& av = a.vals();
  const auto& bv = b.vals();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a.node(), b.node()},
      [](typename Tensor<T>::Node& n) {
        accumulate<T>(n.parents[0].get(), n.grad);
        auto* p1 = n.parents[1].get();
        if (!p1->requires_grad) return;
        p1->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) p1->grad[i] -= n.grad[i];
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  const auto& av = a.vals();
  const auto& bv = b.vals();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a.node(), b.node()},
      [](typename Tensor<T>::Node& n) {
        auto* pa = n.parents[0].get();
        auto* pb = n.parents[1].get();
        if (pa->requires_grad) {
          pa->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pa->grad[i] += n.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pb->grad[i] += n.grad[i] * pa->value[i];
        }
      });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "div");
  std::vector<T> out(a.numel());
  const auto& av = a.vals();
  const auto& bv = b.vals();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a.node(), b.node()},
      [](typename Tensor<T>::Node& n) {
        auto* pa = n.parents[0].get();
        auto* pb = n.parents[1].get();
        if (pa->requires_grad) {
          pa->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pa->grad[i] += n.grad[i] / pb->value[i];
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pb->grad[i] -= n.grad[i] * pa->value[i] / (pb->value[i] * pb->value[i]);
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.numel());
  const auto& av = a.vals();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  return Tensor<T>::make_op(a.shape(), std::move(out), {a.node()},
                            [c](typename Tensor<T>::Node& n) {
                              auto* p = n.parents[0].get();
                              if (!p->requires_grad) return;
                              p->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                p->grad[i] += n.grad[i] * c;
                            });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  std::vector<T> out(a.numel());
  const auto& av = a.vals();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
  return Tensor<T>::make_op(a.shape(), std::move(out), {a.node()},
                            [](typename Tensor<T>::Node& n) {
                              accumulate<T>(n.parents[0].get(), n.grad);
                            });
}

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> elementwise(const Tensor<T>& a, FwdFn f, BwdFn dfdx_from_xy) {
  std::vector<T> out(a.numel());
  const auto& av = a.vals();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a.node()},
      [dfdx_from_xy](typename Tensor<T>::Node& n) {
        auto* p = n.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          p->grad[i] += n.grad[i] * dfdx_from_xy(p->value[i], n.value[i]);
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return elementwise(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return elementwise(
      a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> elu(const Tensor<T>& a) {
  return elementwise(
      a, [](T x) { return x > T(0) ? x : std::expm1(x); },
      [](T x, T y) { return x > T(0) ? T(1) : y + T(1); });
}

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& a) {
  return elementwise(a, [](T x) { return std::tanh(x); },
                     [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  return elementwise(
      a,
      [](T x) {
        // log(1 + e^x), overflow-safe on both tails
        return x > T(20) ? x : std::log1p(std::exp(x));
      },
      [](T x, T) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      });
}

template <typename T>
Tensor<T> exp_t(const Tensor<T>& a) {
  return elementwise(a, [](T x) { return std::exp(x); },
                     [](T, T y) { return y; });
}

template <typename T>
Tensor<T> abs_t(const Tensor<T>& a) {
  return elementwise(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return elementwise(a, [](T x) { return x * x; },
                     [](T x, T) { return T(2) * x; });
}

// C[N,M] = A[N,K] * B[K,M], ikj loop order so the inner loop is contiguous.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw input_error("matmul: incompatible shapes " + shape_str(a.shape()) +
                      " and " + shape_str(b.shape()));
  const std::size_t N = a.dim(0), K = a.dim(1), M = b.dim(1);
  std::vector<T> out(N * M, T(0));
  const T* av = a.vals().data();
  const T* bv = b.vals().data();
  for (std::size_t i = 0; i < N; ++i) {
    T* orow = out.data() + i * M;
    const T* arow = av + i * K;
    for (std::size_t k = 0; k < K; ++k) {
      const T aik = arow[k];
      const T* brow = bv + k * M;
      for (std::size_t j = 0; j < M; ++j) orow[j] += aik * brow[j];
    }
  }
  return Tensor<T>::make_op(
      {N, M}, std::move(out), {a.node(), b.node()},
      [N, K, M](typename Tensor<T>::Node& n) {
        auto* pa = n.parents[0].get();
        auto* pb = n.parents[1].get();
        const T* g = n.grad.data();
        if (pa->requires_grad) {
          pa->ensure_grad();
          // dA = dC * B^T
          for (std::size_t i = 0; i < N; ++i) {
            T* garow = pa->grad.data() + i * K;
            const T* grow = g + i * M;
            for (std::size_t k = 0; k < K; ++k) {
              const T* brow = pb->value.data() + k * M;
              T acc = T(0);
              for (std::size_t j = 0; j < M; ++j) acc += grow[j] * brow[j];
              garow[k] += acc;
            }
          }
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          // dB = A^T * dC
          for (std::size_t i = 0; i < N; ++i) {
            const T* arow = pa->value.data() + i * K;
            const T* grow = g + i * M;
            for (std::size_t k = 0; k < K; ++k) {
              const T aik = arow[k];
              T* gbrow = pb->grad.data() + k * M;
              for (std::size_t j = 0; j < M; ++j) gbrow[j] += aik * grow[j];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  if (a.rank() != 2) throw input_error("transpose2d: rank != 2");
  const std::size_t N = a.dim(0), M = a.dim(1);
  std::vector<T> out(N * M);
  const auto& av = a.vals();
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j) out[j * N + i] = av[i * M + j];
  return Tensor<T>::make_op({M, N}, std::move(out), {a.node()},
                            [N, M](typename Tensor<T>::Node& n) {
                              auto* p = n.parents[0].get();
                              if (!p->requires_grad) return;
                              p->ensure_grad();
                              for (std::size_t i = 0; i < N; ++i)
                                for (std::size_t j = 0; j < M; ++j)
                                  p->grad[i * M + j] += n.grad[j * N + i];
                            });
}

// y[i,:] = x[i,:] + b
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.rank() != 2 || b.rank() != 1 || b.dim(0) != x.dim(1))
    throw input_error("add_rowvec: shape mismatch");
  const std::size_t N = x.dim(0), M = x.dim(1);
  std::vector<T> out(x.vals());
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j) out[i * M + j] += b.vals()[j];
  return Tensor<T>::make_op(
      x.shape(), std::move(out), {x.node(), b.node()},
      [N, M](typename Tensor<T>::Node& n) {
        accumulate<T>(n.parents[0].get(), n.grad);
        auto* pb = n.parents[1].get();
        if (!pb->requires_grad) return;
        pb->ensure_grad();
        for (std::size_t i = 0; i < N; ++i)
          for (std::size_t j = 0; j < M; ++j) pb->grad[j] += n.grad[i * M + j];
      });
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b) {
  return add_rowvec(matmul(x, W), b);
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
    throw input_error("concat_cols: shape mismatch");
  const std::size_t N = a.dim(0), Fa = a.dim(1), Fb = b.dim(1);
  std::vector<T> out(N * (Fa + Fb));
  for (std::size_t i = 0; i < N; ++i) {
    std::copy_n(a.vals().data() + i * Fa, Fa, out.data() + i * (Fa + Fb));
    std::copy_n(b.vals().data() + i * Fb, Fb, out.data() + i * (Fa + Fb) + Fa);
  }
  return Tensor<T>::make_op(
      {N, Fa + Fb}, std::move(out), {a.node(), b.node()},
      [N, Fa, Fb](typename Tensor<T>::Node& n) {
        auto* pa = n.parents[0].get();
        auto* pb = n.parents[1].get();
        if (pa->requires_grad) {
          pa->ensure_grad();
          for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < Fa; ++j)
              pa->grad[i * Fa + j] += n.grad[i * (Fa + Fb) + j];
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < Fb; ++j)
              pb->grad[i * Fb + j] += n.grad[i * (Fa + Fb) + Fa + j];
        }
      });
}

// Channel concat of [C1,H,W] and [C2,H,W].
template <typename T>
Tensor<T> concat_chan(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) ||
      a.dim(2) != b.dim(2))
    throw input_error("concat_chan: shape mismatch");
  const std::size_t Ca = a.dim(0), Cb = b.dim(0), HW = a.dim(1) * a.dim(2);
  std::vector<T> out((Ca + Cb) * HW);
  std::copy(a.vals().begin(), a.vals().end(), out.begin());
  std::copy(b.vals().begin(), b.vals().end(), out.begin() + Ca * HW);
  return Tensor<T>::make_op(
      {Ca + Cb, a.dim(1), a.dim(2)}, std::move(out), {a.node(), b.node()},
      [Ca, Cb, HW](typename Tensor<T>::Node& n) {
        auto* pa = n.parents[0].get();
        auto* pb = n.parents[1].get();
        if (pa->requires_grad) {
          pa->ensure_grad();
          for (std::size_t i = 0; i < Ca * HW; ++i) pa->grad[i] += n.grad[i];
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t i = 0; i < Cb * HW; ++i)
            pb->grad[i] += n.grad[Ca * HW + i];
        }
      });
}

// Repeats a [F] vector into [N,F]; backward sums over rows.
template <typename T>
Tensor<T> tile_rows(const Tensor<T>& v, std::size_t n) {
  if (v.rank() != 1) throw input_error("tile_rows: v must be 1-D");
  const std::size_t F = v.dim(0);
  std::vector<T> out(n * F);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(v.vals().data(), F, out.data() + i * F);
  return Tensor<T>::make_op({n, F}, std::move(out), {v.node()},
                            [n, F](typename Tensor<T>::Node& nd) {
                              auto* p = nd.parents[0].get();
                              if (!p->requires_grad) return;
                              p->ensure_grad();
                              for (std::size_t i = 0; i < n; ++i)
                                for (std::size_t j = 0; j < F; ++j)
                                  p->grad[j] += nd.grad[i * F + j];
                            });
}

// Gathers rows of a [N,F] matrix: out[i,:] = src[idx[i],:]. Backward is
// scatter-add, so repeated indices accumulate.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& src, std::vector<std::size_t> idx) {
  if (src.rank() != 2) throw input_error("gather_rows: src must be 2-D");
  const std::size_t F = src.dim(1), N = src.dim(0);
  for (auto i : idx)
    if (i >= N) throw input_error("gather_rows: index out of range");
  std::vector<T> out(idx.size() * F);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(src.vals().data() + idx[i] * F, F, out.data() + i * F);
  auto idx_keep = std::make_shared<std::vector<std::size_t>>(std::move(idx));
  return Tensor<T>::make_op(
      {idx_keep->size(), F}, std::move(out), {src.node()},
      [idx_keep, F](typename Tensor<T>::Node& n) {
        auto* p = n.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const auto& ix = *idx_keep;
        for (std::size_t i = 0; i < ix.size(); ++i)
          for (std::size_t j = 0; j < F; ++j)
            p->grad[ix[i] * F + j] += n.grad[i * F + j];
      });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T acc = T(0);
  for (const T v : a.vals()) acc += v;
  return Tensor<T>::make_op({1}, {acc}, {a.node()},
                            [](typename Tensor<T>::Node& n) {
                              auto* p = n.parents[0].get();
                              if (!p->requires_grad) return;
                              p->ensure_grad();
                              const T g = n.grad[0];
                              for (auto& gv : p->grad) gv += g;
                            });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return scale(sum_all(a), T(1) / static_cast<T>(a.numel()));
}

// Row sum of [N,M] -> [N].
template <typename T>
Tensor<T> sum_rows(const Tensor<T>& a) {
  if (a.rank() != 2) throw input_error("sum_rows: rank != 2");
  const std::size_t N = a.dim(0), M = a.dim(1);
  std::vector<T> out(N, T(0));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j) out[i] += a.vals()[i * M + j];
  return Tensor<T>::make_op({N}, std::move(out), {a.node()},
                            [N, M](typename Tensor<T>::Node& n) {
                              auto* p = n.parents[0].get();
                              if (!p->requires_grad) return;
                              p->ensure_grad();
                              for (std::size_t i = 0; i < N; ++i)
                                for (std::size_t j = 0; j < M; ++j)
                                  p->grad[i * M + j] += n.grad[i];
                            });
}

// Column sum of [N,M] -> [M].
template <typename T>
Tensor<T> sum_cols(const Tensor<T>& a) {
  if (a.rank() != 2) throw input_error("sum_cols: rank != 2");
  const std::size_t N = a.dim(0), M = a.dim(1);
  std::vector<T> out(M, T(0));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j) out[j] += a.vals()[i * M + j];
  return Tensor<T>::make_op({M}, std::move(out), {a.node()},
                            [N, M](typename Tensor<T>::Node& n) {
                              auto* p = n.parents[0].get();
                              if (!p->requires_grad) return;
                              p->ensure_grad();
                              for (std::size_t i = 0; i < N; ++i)
                                for (std::size_t j = 0; j < M; ++j)
                                  p->grad[i * M + j] += n.grad[j];
                            });
}

// [P,K,F] -> [P,F], summing the middle axis.
template <typename T>
Tensor<T> sum_mid(const Tensor<T>& a) {
  if (a.rank() != 3) throw input_error("sum_mid: rank != 3");
  const std::size_t P = a.dim(0), K = a.dim(1), F = a.dim(2);
  std::vector<T> out(P * F, T(0));
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t f = 0; f < F; ++f)
        out[p * F + f] += a.vals()[(p * K + k) * F + f];
  return Tensor<T>::make_op(
      {P, F}, std::move(out), {a.node()},
      [P, K, F](typename Tensor<T>::Node& n) {
        auto* pa = n.parents[0].get();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t p = 0; p < P; ++p)
          for (std::size_t k = 0; k < K; ++k)
            for (std::size_t f = 0; f < F; ++f)
              pa->grad[(p * K + k) * F + f] += n.grad[p * F + f];
      });
}

// Column-wise max of [N,F] -> [F]; ties resolve to the lowest row so the
// subgradient choice is deterministic.
template <typename T>
Tensor<T> max_cols(const Tensor<T>& a) {
  if (a.rank() != 2) throw input_error("max_cols: rank != 2");
  const std::size_t N = a.dim(0), F = a.dim(1);
  if (N == 0) throw input_error("max_cols: empty input");
  std::vector<T> out(F);
  auto argmax = std::make_shared<std::vector<std::size_t>>(F, 0);
  for (std::size_t f = 0; f < F; ++f) {
    T best = a.vals()[f];
    std::size_t bi = 0;
    for (std::size_t i = 1; i < N; ++i) {
      const T v = a.vals()[i * F + f];
      if (v > best) {
        best = v;
        bi = i;
      }
    }
    out[f] = best;
    (*argmax)[f] = bi;
  }
  return Tensor<T>::make_op({F}, std::move(out), {a.node()},
                            [argmax, F](typename Tensor<T>::Node& n) {
                              auto* p = n.parents[0].get();
                              if (!p->requires_grad) return;
                              p->ensure_grad();
                              for (std::size_t f = 0; f < F; ++f)
                                p->grad[(*argmax)[f] * F + f] += n.grad[f];
                            });
}

// out[i,:] = a[i,:] broadcast against column vector c[i]: a[i,j] / c[i].
template <typename T>
Tensor<T> div_rows(const Tensor<T>& a, const Tensor<T>& c) {
  if (a.rank() != 2 || c.rank() != 1 || c.dim(0) != a.dim(0))
    throw input_error("div_rows: shape mismatch");
  const std::size_t N = a.dim(0), M = a.dim(1);
  std::vector<T> out(N * M);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j)
      out[i * M + j] = a.vals()[i * M + j] / c.vals()[i];
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a.node(), c.node()},
      [N, M](typename Tensor<T>::Node& n) {
        auto* pa = n.parents[0].get();
        auto* pc = n.parents[1].get();
        if (pa->requires_grad) {
          pa->ensure_grad();
          for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < M; ++j)
              pa->grad[i * M + j] += n.grad[i * M + j] / pc->value[i];
        }
        if (pc->requires_grad) {
          pc->ensure_grad();
          for (std::size_t i = 0; i < N; ++i) {
            T acc = T(0);
            for (std::size_t j = 0; j < M; ++j)
              acc += n.grad[i * M + j] * pa->value[i * M + j];
            pc->grad[i] -= acc / (pc->value[i] * pc->value[i]);
          }
        }
      });
}

// Softmax along the last axis with max-subtraction stabilization.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  if (a.rank() == 0) throw input_error("softmax: undefined on rank-0");
  const std::size_t M = a.shape().back();
  const std::size_t R = a.numel() / M;
  std::vector<T> out(a.numel());
  for (std::size_t r = 0; r < R; ++r) {
    const T* row = a.vals().data() + r * M;
    T* orow = out.data() + r * M;
    T mx = row[0];
    for (std::size_t j = 1; j < M; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < M; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < M; ++j) orow[j] /= sum;
  }
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a.node()},
      [R, M](typename Tensor<T>::Node& n) {
        auto* p = n.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t r = 0; r < R; ++r) {
          const T* y = n.value.data() + r * M;
          const T* g = n.grad.data() + r * M;
          T dot = T(0);
          for (std::size_t j = 0; j < M; ++j) dot += g[j] * y[j];
          for (std::size_t j = 0; j < M; ++j)
            p->grad[r * M + j] += y[j] * (g[j] - dot);
        }
      });
}

// Layer normalization over the last axis (affine-free; scale/shift, when
// wanted, compose outside).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, T eps = T(1e-5)) {
  if (a.rank() == 0) throw input_error("layer_norm: undefined on rank-0");
  const std::size_t M = a.shape().back();
  const std::size_t R = a.numel() / M;
  std::vector<T> out(a.numel());
  auto stats = std::make_shared<std::vector<T>>(2 * R);  // mean, inv_std
  for (std::size_t r = 0; r < R; ++r) {
    const T* row = a.vals().data() + r * M;
    T mean = T(0);
    for (std::size_t j = 0; j < M; ++j) mean += row[j];
    mean /= static_cast<T>(M);
    T var = T(0);
    for (std::size_t j = 0; j < M; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(M);
    const T inv = T(1) / std::sqrt(var + eps);
    (*stats)[2 * r] = mean;
    (*stats)[2 * r + 1] = inv;
    for (std::size_t j = 0; j < M; ++j) out[r * M + j] = (row[j] - mean) * inv;
  }
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a.node()},
      [R, M, stats](typename Tensor<T>::Node& n) {
        auto* p = n.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t r = 0; r < R; ++r) {
          const T inv = (*stats)[2 * r + 1];
          const T* y = n.value.data() + r * M;
          const T* g = n.grad.data() + r * M;
          T gsum = T(0), gysum = T(0);
          for (std::size_t j = 0; j < M; ++j) {
            gsum += g[j];
            gysum += g[j] * y[j];
          }
          const T invM = T(1) / static_cast<T>(M);
          for (std::size_t j = 0; j < M; ++j)
            p->grad[r * M + j] +=
                inv * (g[j] - gsum * invM - y[j] * gysum * invM);
        }
      });
}

enum class Padding { kSame, kValid };

// Cross-correlation of x[C,H,W] with k[Co,C,kh,kw] plus per-channel bias.
// stride in {1,2}; odd kernels only.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias,
                 std::size_t stride, Padding padding) {
  if (x.rank() != 3 || k.rank() != 4)
    throw input_error("conv2d: x must be [C,H,W] and k [Co,C,kh,kw]");
  if (stride != 1 && stride != 2) throw input_error("conv2d: stride must be 1 or 2");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t Co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (k.dim(1) != C) throw input_error("conv2d: channel mismatch");
  if (kh % 2 == 0 || kw % 2 == 0) throw input_error("conv2d: kernel dims must be odd");
  if (bias.rank() != 1 || bias.dim(0) != Co)
    throw input_error("conv2d: bias shape mismatch");
  const std::size_t ph = padding == Padding::kSame ? (kh - 1) / 2 : 0;
  const std::size_t pw = padding == Padding::kSame ? (kw - 1) / 2 : 0;
  if (H + 2 * ph < kh || W + 2 * pw < kw)
    throw input_error("conv2d: kernel larger than padded input");
  const std::size_t Ho = (H + 2 * ph - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * pw - kw) / stride + 1;

  std::vector<T> out(Co * Ho * Wo);
  for (std::size_t co = 0; co < Co; ++co)
    std::fill_n(out.data() + co * Ho * Wo, Ho * Wo, bias.vals()[co]);

  const T* xv = x.vals().data();
  const T* kv = k.vals().data();
  // Accumulate one kernel tap at a time; for stride 1 the inner loop is a
  // contiguous axpy over the output row.
  for (std::size_t co = 0; co < Co; ++co) {
    T* oc = out.data() + co * Ho * Wo;
    for (std::size_t c = 0; c < C; ++c) {
      const T* xc = xv + c * H * W;
      for (std::size_t i = 0; i < kh; ++i) {
        for (std::size_t j = 0; j < kw; ++j) {
          const T kval = kv[((co * C + c) * kh + i) * kw + j];
          if (kval == T(0)) continue;
          for (std::size_t ho = 0; ho < Ho; ++ho) {
            const std::ptrdiff_t hi =
                static_cast<std::ptrdiff_t>(ho * stride + i) -
                static_cast<std::ptrdiff_t>(ph);
            if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
            const T* xrow = xc + hi * W;
            T* orow = oc + ho * Wo;
            const std::ptrdiff_t woff = static_cast<std::ptrdiff_t>(j) -
                                        static_cast<std::ptrdiff_t>(pw);
            if (stride == 1) {
              std::size_t w0 = woff < 0 ? static_cast<std::size_t>(-woff) : 0;
              std::size_t w1 = std::min(
                  Wo, static_cast<std::size_t>(
                          std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(W) - woff)));
              for (std::size_t wo = w0; wo < w1; ++wo)
                orow[wo] += kval * xrow[wo + woff];
            } else {
              for (std::size_t wo = 0; wo < Wo; ++wo) {
                const std::ptrdiff_t wi =
                    static_cast<std::ptrdiff_t>(wo * stride) + woff;
                if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                orow[wo] += kval * xrow[wi];
              }
            }
          }
        }
      }
    }
  }

  return Tensor<T>::make_op(
      {Co, Ho, Wo}, std::move(out), {x.node(), k.node(), bias.node()},
      [C, H, W, Co, kh, kw, ph, pw, Ho, Wo, stride](typename Tensor<T>::Node& n) {
        auto* px = n.parents[0].get();
        auto* pk = n.parents[1].get();
        auto* pb = n.parents[2].get();
        const T* g = n.grad.data();
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t co = 0; co < Co; ++co) {
            T acc = T(0);
            const T* gc = g + co * Ho * Wo;
            for (std::size_t i = 0; i < Ho * Wo; ++i) acc += gc[i];
            pb->grad[co] += acc;
          }
        }
        const bool need_x = px->requires_grad;
        const bool need_k = pk->requires_grad;
        if (!need_x && !need_k) return;
        if (need_x) px->ensure_grad();
        if (need_k) pk->ensure_grad();
        for (std::size_t co = 0; co < Co; ++co) {
          const T* gc = g + co * Ho * Wo;
          for (std::size_t c = 0; c < C; ++c) {
            const T* xc = px->value.data() + c * H * W;
            T* gxc = need_x ? px->grad.data() + c * H * W : nullptr;
            for (std::size_t i = 0; i < kh; ++i) {
              for (std::size_t j = 0; j < kw; ++j) {
                const std::size_t kidx = ((co * C + c) * kh + i) * kw + j;
                const T kval = pk->value[kidx];
                T kacc = T(0);
                for (std::size_t ho = 0; ho < Ho; ++ho) {
                  const std::ptrdiff_t hi =
                      static_cast<std::ptrdiff_t>(ho * stride + i) -
                      static_cast<std::ptrdiff_t>(ph);
                  if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
                  const T* grow = gc + ho * Wo;
                  const std::size_t xbase = static_cast<std::size_t>(hi) * W;
                  const std::ptrdiff_t woff = static_cast<std::ptrdiff_t>(j) -
                                              static_cast<std::ptrdiff_t>(pw);
                  for (std::size_t wo = 0; wo < Wo; ++wo) {
                    const std::ptrdiff_t wi =
                        static_cast<std::ptrdiff_t>(wo * stride) + woff;
                    if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                    const std::size_t xi = xbase + static_cast<std::size_t>(wi);
                    if (need_k) kacc += grow[wo] * xc[xi];
                    if (need_x) gxc[xi] += grow[wo] * kval;
                  }
                }
                if (need_k) pk->grad[kidx] += kacc;
              }
            }
          }
        }
      });
}

// Bilinear resize of [C,H,W] by exactly 2 or 1/2, align-corners=false.
// Downscale by 1/2 reduces to the mean of each 2x2 block.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, bool upscale) {
  if (x.rank() != 3) throw input_error("resize_bilinear: x must be [C,H,W]");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (!upscale && (H % 2 != 0 || W % 2 != 0))
    throw input_error("resize_bilinear: dims not divisible by 2");
  const std::size_t Ho = upscale ? H * 2 : H / 2;
  const std::size_t Wo = upscale ? W * 2 : W / 2;

  // Precompute the 1-D source taps; the 2-D kernel is their outer product.
  struct Tap {
    std::size_t i0, i1;
    T w0, w1;
  };
  auto make_taps = [&](std::size_t in, std::size_t on) {
    std::vector<Tap> taps(on);
    const double scale = static_cast<double>(in) / static_cast<double>(on);
    for (std::size_t o = 0; o < on; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      if (src > static_cast<double>(in - 1)) src = static_cast<double>(in - 1);
      const auto i0 = static_cast<std::size_t>(src);
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      const T f = static_cast<T>(src - static_cast<double>(i0));
      taps[o] = {i0, i1, T(1) - f, f};
    }
    return taps;
  };
  auto htaps = std::make_shared<std::vector<Tap>>(make_taps(H, Ho));
  auto wtaps = std::make_shared<std::vector<Tap>>(make_taps(W, Wo));

  std::vector<T> out(C * Ho * Wo);
  for (std::size_t c = 0; c < C; ++c) {
    const T* xc = x.vals().data() + c * H * W;
    T* oc = out.data() + c * Ho * Wo;
    for (std::size_t ho = 0; ho < Ho; ++ho) {
      const Tap& th = (*htaps)[ho];
      for (std::size_t wo = 0; wo < Wo; ++wo) {
        const Tap& tw = (*wtaps)[wo];
        oc[ho * Wo + wo] = th.w0 * (tw.w0 * xc[th.i0 * W + tw.i0] +
                                    tw.w1 * xc[th.i0 * W + tw.i1]) +
                           th.w1 * (tw.w0 * xc[th.i1 * W + tw.i0] +
                                    tw.w1 * xc[th.i1 * W + tw.i1]);
      }
    }
  }
  return Tensor<T>::make_op(
      {C, Ho, Wo}, std::move(out), {x.node()},
      [C, H, W, Ho, Wo, htaps, wtaps](typename Tensor<T>::Node& n) {
        auto* p = n.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t c = 0; c < C; ++c) {
          T* gx = p->grad.data() + c * H * W;
          const T* g = n.grad.data() + c * Ho * Wo;
          for (std::size_t ho = 0; ho < Ho; ++ho) {
            const auto& th = (*htaps)[ho];
            for (std::size_t wo = 0; wo < Wo; ++wo) {
              const auto& tw = (*wtaps)[wo];
              const T gv = g[ho * Wo + wo];
              gx[th.i0 * W + tw.i0] += gv * th.w0 * tw.w0;
              gx[th.i0 * W + tw.i1] += gv * th.w0 * tw.w1;
              gx[th.i1 * W + tw.i0] += gv * th.w1 * tw.w0;
              gx[th.i1 * W + tw.i1] += gv * th.w1 * tw.w1;
            }
          }
        }
      });
}

}  // namespace ops

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return ops::add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return ops::sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return ops::mul(a, b);
}

}  // namespace gadc
