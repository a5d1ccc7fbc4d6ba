// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Immutable kd-tree over a point cloud with radius-bounded and k-nearest
// queries, plus the exhaustive-scan reference used as a test oracle. All
// ordering is by (distance, index) so results are reproducible and
// independent of build order.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "gadc/common.hpp"
#include "gadc/geometry.hpp"

namespace gadc {

struct NeighborList {
  std::vector<std::size_t> indices;
  std::vector<double> distances;
  std::size_t found = 0;       // in-ball count before replication
  bool out_of_ball = false;    // empty-ball fallback engaged
};

namespace detail {

using P3 = std::array<double, 3>;

inline double dist2(const P3& a, const P3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

struct Cand {
  double d2;
  std::size_t idx;
  bool operator<(const Cand& o) const {
    return d2 < o.d2 || (d2 == o.d2 && idx < o.idx);
  }
};

// Nearest-first cyclic replication to exactly K entries.
inline NeighborList replicate(std::vector<Cand> found, std::size_t K,
                              bool out_of_ball) {
  std::sort(found.begin(), found.end());
  NeighborList out;
  out.found = out_of_ball ? 0 : found.size();
  out.out_of_ball = out_of_ball;
  out.indices.reserve(K);
  out.distances.reserve(K);
  for (std::size_t i = 0; i < K; ++i) {
    const Cand& c = found[i % found.size()];
    out.indices.push_back(c.idx);
    out.distances.push_back(std::sqrt(c.d2));
  }
  return out;
}

}  // namespace detail

class SpatialIndex {
 public:
  explicit SpatialIndex(const PointSet& points)
      : pts_(&points.positions) {
    const std::size_t n = pts_->size();
    if (n == 0) throw input_error("spatial index over empty point set");
    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    nodes_.reserve(2 * n / kLeafSize + 2);
    root_ = build(0, n);
  }

  std::size_t size() const { return pts_->size(); }

  // Exactly K entries: the K nearest with distance <= r, ties by lower
  // index, replicated cyclically when fewer than K lie in the ball. An empty
  // ball falls back to the single globally nearest point, flagged.
  NeighborList ball_query(const detail::P3& center, double r,
                          std::size_t K) const {
    if (!(r > 0.0)) throw input_error("ball_query: radius must be positive");
    if (K < 1) throw input_error("ball_query: K must be at least 1");
    auto found = bounded_search(center, r * r, K);
    if (found.empty()) {
      auto nearest = bounded_search(
          center, std::numeric_limits<double>::infinity(), 1);
      return detail::replicate(std::move(nearest), K, true);
    }
    return detail::replicate(std::move(found), K, false);
  }

  // k nearest by Euclidean distance, ascending, ties by lower index.
  NeighborList knn_query(const detail::P3& center, std::size_t k) const {
    if (k < 1) throw input_error("knn_query: k must be at least 1");
    if (k > size()) throw input_error("knn_query: k exceeds point count");
    auto found =
        bounded_search(center, std::numeric_limits<double>::infinity(), k);
    return detail::replicate(std::move(found), k, false);
  }

 private:
  static constexpr std::size_t kLeafSize = 16;
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    double bbox_min[3], bbox_max[3];
    std::size_t begin, end;            // range into order_
    std::size_t left = kNone, right = kNone;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({});
    Node& n = nodes_.back();
    n.begin = begin;
    n.end = end;
    for (int a = 0; a < 3; ++a) {
      n.bbox_min[a] = std::numeric_limits<double>::infinity();
      n.bbox_max[a] = -std::numeric_limits<double>::infinity();
    }
    for (std::size_t i = begin; i < end; ++i) {
      const auto& p = (*pts_)[order_[i]];
      for (int a = 0; a < 3; ++a) {
        n.bbox_min[a] = std::min(n.bbox_min[a], p[a]);
        n.bbox_max[a] = std::max(n.bbox_max[a], p[a]);
      }
    }
    if (end - begin <= kLeafSize) return id;
    int axis = 0;
    double width = -1;
    for (int a = 0; a < 3; ++a) {
      const double w = n.bbox_max[a] - n.bbox_min[a];
      if (w > width) {
        width = w;
        axis = a;
      }
    }
    if (width <= 0.0) return id;  // all points coincide
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                       const double pa = (*pts_)[a][axis], pb = (*pts_)[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const std::size_t l = build(begin, mid);
    const std::size_t r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  double bbox_dist2(const Node& n, const detail::P3& c) const {
    double acc = 0;
    for (int a = 0; a < 3; ++a) {
      double d = 0;
      if (c[a] < n.bbox_min[a]) d = n.bbox_min[a] - c[a];
      else if (c[a] > n.bbox_max[a]) d = c[a] - n.bbox_max[a];
      acc += d * d;
    }
    return acc;
  }

  // Up to `cap` candidates with squared distance <= limit2, best by
  // (distance, index). Nodes are pruned only when strictly farther than the
  // current bound so boundary ties are never lost.
  std::vector<detail::Cand> bounded_search(const detail::P3& center,
                                           double limit2,
                                           std::size_t cap) const {
    auto worse = [](const detail::Cand& a, const detail::Cand& b) {
      return a < b;  // max-heap: worst candidate on top
    };
    std::priority_queue<detail::Cand, std::vector<detail::Cand>,
                        decltype(worse)> heap(worse);
    auto bound = [&] {
      return heap.size() == cap ? std::min(limit2, heap.top().d2) : limit2;
    };
    std::vector<std::size_t> stack{root_};
    while (!stack.empty()) {
      const Node& n = nodes_[stack.back()];
      stack.pop_back();
      if (bbox_dist2(n, center) > bound()) continue;
      if (n.left == kNone) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
          const std::size_t idx = order_[i];
          const double d2 = detail::dist2((*pts_)[idx], center);
          if (d2 > limit2) continue;
          const detail::Cand c{d2, idx};
          if (heap.size() < cap) {
            heap.push(c);
          } else if (c < heap.top()) {
            heap.pop();
            heap.push(c);
          }
        }
      } else {
        // nearer child last so it pops first
        const double dl = bbox_dist2(nodes_[n.left], center);
        const double dr = bbox_dist2(nodes_[n.right], center);
        if (dl < dr) {
          stack.push_back(n.right);
          stack.push_back(n.left);
        } else {
          stack.push_back(n.left);
          stack.push_back(n.right);
        }
      }
    }
    std::vector<detail::Cand> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    return out;
  }

  const std::vector<detail::P3>* pts_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t root_ = 0;
};

// Exhaustive-scan references with the identical contract.

inline NeighborList brute_force_ball_query(const PointSet& points,
                                           const detail::P3& center, double r,
                                           std::size_t K) {
  if (points.size() == 0) throw input_error("ball query over empty point set");
  if (!(r > 0.0)) throw input_error("ball_query: radius must be positive");
  if (K < 1) throw input_error("ball_query: K must be at least 1");
  const double r2 = r * r;
  std::vector<detail::Cand> in_ball;
  detail::Cand best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d2 = detail::dist2(points.positions[i], center);
    const detail::Cand c{d2, i};
    if (c < best) best = c;
    if (d2 <= r2) in_ball.push_back(c);
  }
  if (in_ball.empty()) return detail::replicate({best}, K, true);
  std::sort(in_ball.begin(), in_ball.end());
  if (in_ball.size() > K) in_ball.resize(K);
  return detail::replicate(std::move(in_ball), K, false);
}

inline NeighborList brute_force_knn_query(const PointSet& points,
                                          const detail::P3& center,
                                          std::size_t k) {
  if (k < 1) throw input_error("knn_query: k must be at least 1");
  if (k > points.size()) throw input_error("knn_query: k exceeds point count");
  std::vector<detail::Cand> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    all.push_back({detail::dist2(points.positions[i], center), i});
  std::sort(all.begin(), all.end());
  all.resize(k);
  return detail::replicate(std::move(all), k, false);
}

}  // namespace gadc
