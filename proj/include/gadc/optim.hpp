// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Adam with bias correction and the stepped learning-rate schedule.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gadc/nn.hpp"

namespace gadc {

inline double lr_schedule(std::size_t epoch, double base_lr = 1e-3,
                          double decay = 5.0,
                          const std::vector<std::size_t>& milestones = {5, 15,
                                                                        25,
                                                                        35}) {
  std::size_t m = 0;
  for (auto ms : milestones)
    if (ms <= epoch) ++m;
  return base_lr / std::pow(decay, static_cast<double>(m));
}

template <typename T>
class Adam {
 public:
  explicit Adam(T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore<T>& params, T lr) {
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (auto& [name, p] : params.items()) {
      if (p.grad().empty()) continue;  // parameter unused this step
      auto& m = slot(m_, name, p.numel());
      auto& v = slot(v_, name, p.numel());
      auto& w = p.vals_mut();
      const auto& g = p.grad();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }

  // Copies for serialization; zero-filled when the slot has never been touched.
  std::vector<T> first_moment(const std::string& name, std::size_t n) const {
    return slot_copy(m_, name, n);
  }
  std::vector<T> second_moment(const std::string& name, std::size_t n) const {
    return slot_copy(v_, name, n);
  }
  void set_slot(const std::string& name, std::vector<T> m, std::vector<T> v) {
    m_[name] = std::move(m);
    v_[name] = std::move(v);
  }
  void clear_slot(const std::string& name) {
    m_.erase(name);
    v_.erase(name);
  }

 private:
  std::vector<T>& slot(std::unordered_map<std::string, std::vector<T>>& store,
                       const std::string& name, std::size_t n) {
    auto it = store.find(name);
    if (it == store.end())
      it = store.emplace(name, std::vector<T>(n, T(0))).first;
    return it->second;
  }

  static std::vector<T> slot_copy(
      const std::unordered_map<std::string, std::vector<T>>& store,
      const std::string& name, std::size_t n) {
    auto it = store.find(name);
    return it == store.end() ? std::vector<T>(n, T(0)) : it->second;
  }

  T beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::unordered_map<std::string, std::vector<T>> m_, v_;
};

}  // namespace gadc
