// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Parameter registry and the small layer set used across the model: dense
// layers, MLP stacks, and 2-D convolutions. Initialization is seeded and
// deterministic; parameter names are stable paths for checkpointing.

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gadc/common.hpp"
#include "gadc/tensor.hpp"

namespace gadc {

template <typename T>
class ParamStore {
 public:
  // Returned tensors are shared handles onto the registry entries: copies see
  // the same values and gradients, so callers may hold them by value.
  Tensor<T> create(const std::string& name, Shape shape, std::vector<T> data) {
    if (index_.count(name)) throw config_error("duplicate parameter: " + name);
    auto t = Tensor<T>::from_data(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
  }

  Tensor<T> kaiming(const std::string& name, Shape shape, std::size_t fan_in,
                    Rng& rng) {
    const T bound = std::sqrt(T(6) / static_cast<T>(fan_in));
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<T>(rng.uniform(-bound, bound));
    return create(name, std::move(shape), std::move(data));
  }

  Tensor<T> zeros(const std::string& name, Shape shape) {
    return create(name, std::move(shape), std::vector<T>(shape_numel(shape), T(0)));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<T> at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw config_error("unknown parameter: " + name);
    return items_[it->second].second;
  }

  // Insertion order; iteration order is the serialization order.
  std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& items() const {
    return items_;
  }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Act { kNone, kRelu, kElu, kSigmoid, kTanh, kSoftplus };

template <typename T>
Tensor<T> apply_act(const Tensor<T>& x, Act a) {
  switch (a) {
    case Act::kNone: return x;
    case Act::kRelu: return ops::relu(x);
    case Act::kElu: return ops::elu(x);
    case Act::kSigmoid: return ops::sigmoid(x);
    case Act::kTanh: return ops::tanh_act(x);
    case Act::kSoftplus: return ops::softplus(x);
  }
  throw config_error("unknown activation");
}

template <typename T>
class Linear {
 public:
  Linear() = default;

  Linear(ParamStore<T>& ps, const std::string& prefix, std::size_t in,
         std::size_t out, Rng& rng, bool with_bias = true)
      : with_bias_(with_bias) {
    W_ = ps.kaiming(prefix + ".W", {in, out}, in, rng);
    if (with_bias_) b_ = ps.zeros(prefix + ".b", {out});
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return with_bias_ ? ops::dense(x, W_, b_) : ops::matmul(x, W_);
  }

 private:
  Tensor<T> W_;  // handles share storage with the registry entries
  Tensor<T> b_;
  bool with_bias_ = true;
};

// Fully connected stack: hidden layers use `hidden`, the last layer `final`.
template <typename T>
class Mlp {
 public:
  Mlp() = default;

  Mlp(ParamStore<T>& ps, const std::string& prefix,
      const std::vector<std::size_t>& dims, Rng& rng, Act hidden = Act::kElu,
      Act final = Act::kNone) : hidden_(hidden), final_(final) {
    if (dims.size() < 2) throw config_error("mlp needs at least two dims");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      layers_.emplace_back(ps, prefix + ".l" + std::to_string(i), dims[i],
                           dims[i + 1], rng);
  }

  Tensor<T> forward(Tensor<T> x) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i].forward(x);
      x = apply_act(x, i + 1 < layers_.size() ? hidden_ : final_);
    }
    return x;
  }

 private:
  std::vector<Linear<T>> layers_;
  Act hidden_ = Act::kElu;
  Act final_ = Act::kNone;
};

template <typename T>
class Conv {
 public:
  Conv() = default;

  Conv(ParamStore<T>& ps, const std::string& prefix, std::size_t cin,
       std::size_t cout, std::size_t ksize, std::size_t stride,
       ops::Padding pad, Rng& rng)
      : stride_(stride), pad_(pad) {
    k_ = ps.kaiming(prefix + ".k", {cout, cin, ksize, ksize},
                    cin * ksize * ksize, rng);
    b_ = ps.zeros(prefix + ".b", {cout});
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return ops::conv2d(x, k_, b_, stride_, pad_);
  }

 private:
  Tensor<T> k_;
  Tensor<T> b_;
  std::size_t stride_ = 1;
  ops::Padding pad_ = ops::Padding::kSame;
};

}  // namespace gadc
