// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera model, depth-map back-projection to world-frame point
// clouds, and forward projection. Depth 0 marks a sensor hole and never
// produces a point.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gadc/common.hpp"

namespace gadc {

struct Mat4 {
  // row-major
  std::array<double, 16> m{};

  static Mat4 identity() {
    Mat4 r;
    r.m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    return r;
  }

  double& operator()(std::size_t i, std::size_t j) { return m[i * 4 + j]; }
  double operator()(std::size_t i, std::size_t j) const { return m[i * 4 + j]; }

  Mat4 operator*(const Mat4& o) const {
    Mat4 r;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double acc = 0;
        for (std::size_t k = 0; k < 4; ++k) acc += (*this)(i, k) * o(k, j);
        r(i, j) = acc;
      }
    return r;
  }

  std::array<double, 4> apply(const std::array<double, 4>& v) const {
    std::array<double, 4> r{};
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t k = 0; k < 4; ++k) r[i] += (*this)(i, k) * v[k];
    return r;
  }

  // Gauss-Jordan with partial pivoting.
  Mat4 inverse() const {
    std::array<double, 32> a{};
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) a[i * 8 + j] = (*this)(i, j);
      a[i * 8 + 4 + i] = 1.0;
    }
    for (std::size_t col = 0; col < 4; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < 4; ++r)
        if (std::abs(a[r * 8 + col]) > std::abs(a[piv * 8 + col])) piv = r;
      if (std::abs(a[piv * 8 + col]) < 1e-12)
        throw config_error("singular 4x4 matrix");
      if (piv != col)
        for (std::size_t j = 0; j < 8; ++j) std::swap(a[col * 8 + j], a[piv * 8 + j]);
      const double d = a[col * 8 + col];
      for (std::size_t j = 0; j < 8; ++j) a[col * 8 + j] /= d;
      for (std::size_t r = 0; r < 4; ++r) {
        if (r == col) continue;
        const double f = a[r * 8 + col];
        if (f == 0.0) continue;
        for (std::size_t j = 0; j < 8; ++j) a[r * 8 + j] -= f * a[col * 8 + j];
      }
    }
    Mat4 inv;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) inv(i, j) = a[i * 8 + 4 + j];
    return inv;
  }
};

struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  std::size_t width = 0, height = 0;
  Mat4 extrinsics = Mat4::identity();  // camera-from-world

  Mat4 intrinsics() const {
    Mat4 k = Mat4::identity();
    k(0, 0) = fx;
    k(0, 2) = cx;
    k(1, 1) = fy;
    k(1, 2) = cy;
    return k;
  }

  void validate() const {
    if (!(fx > 0) || !(fy > 0))
      throw config_error("camera focal lengths must be positive");
    if (width == 0 || height == 0)
      throw config_error("camera image size must be positive");
    const Mat4& t = extrinsics;
    // rotation block orthonormal, det +1, affine bottom row
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        double dot = 0;
        for (std::size_t k = 0; k < 3; ++k) dot += t(i, k) * t(j, k);
        const double expect = i == j ? 1.0 : 0.0;
        if (std::abs(dot - expect) > 1e-6)
          throw config_error("extrinsics rotation block is not orthonormal");
      }
    const double det =
        t(0, 0) * (t(1, 1) * t(2, 2) - t(1, 2) * t(2, 1)) -
        t(0, 1) * (t(1, 0) * t(2, 2) - t(1, 2) * t(2, 0)) +
        t(0, 2) * (t(1, 0) * t(2, 1) - t(1, 1) * t(2, 0));
    if (std::abs(det - 1.0) > 1e-6)
      throw config_error("extrinsics rotation determinant is not +1");
    if (std::abs(t(3, 0)) > 1e-6 || std::abs(t(3, 1)) > 1e-6 ||
        std::abs(t(3, 2)) > 1e-6 || std::abs(t(3, 3) - 1.0) > 1e-6)
      throw config_error("extrinsics bottom row must be (0,0,0,1)");
  }
};

class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(std::size_t height, std::size_t width, double fill = 0.0)
      : h_(height), w_(width), v_(height * width, fill) {}

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  double at(std::size_t row, std::size_t col) const { return v_[row * w_ + col]; }
  double& at(std::size_t row, std::size_t col) { return v_[row * w_ + col]; }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }

  void validate() const {
    for (const double d : v_)
      if (!(d >= 0.0) || !std::isfinite(d))
        throw input_error("depth values must be finite and non-negative");
  }

 private:
  std::size_t h_ = 0, w_ = 0;
  std::vector<double> v_;
};

struct PointSet {
  std::vector<std::array<double, 3>> positions;
  std::vector<std::vector<double>> features;        // optional, N x F
  std::vector<std::array<std::int64_t, 2>> pixel_origin;  // optional, (u, v)

  std::size_t size() const { return positions.size(); }
};

inline PointSet back_project(const DepthMap& depth, const CameraModel& cam) {
  if (depth.height() != cam.height || depth.width() != cam.width)
    throw input_error("depth map size does not match camera image size");
  cam.validate();
  const Mat4 chain = cam.extrinsics.inverse() * cam.intrinsics().inverse();
  PointSet out;
  for (std::size_t v = 0; v < depth.height(); ++v) {
    for (std::size_t u = 0; u < depth.width(); ++u) {
      const double d = depth.at(v, u);
      if (d <= 0.0) continue;
      const auto p = chain.apply({static_cast<double>(u) * d,
                                  static_cast<double>(v) * d, d, 1.0});
      out.positions.push_back({p[0] / p[3], p[1] / p[3], p[2] / p[3]});
      out.pixel_origin.push_back({static_cast<std::int64_t>(u),
                                  static_cast<std::int64_t>(v)});
    }
  }
  return out;
}

struct Projection {
  struct Entry {
    std::size_t point_index;
    double u, v, d;
  };
  std::vector<Entry> entries;
  std::size_t behind_camera = 0;
};

inline Projection project(const PointSet& points, const CameraModel& cam) {
  cam.validate();
  const Mat4 chain = cam.intrinsics() * cam.extrinsics;
  Projection out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points.positions[i];
    const auto q = chain.apply({p[0], p[1], p[2], 1.0});
    const double d = q[2] / q[3];
    if (d <= 0.0) {
      ++out.behind_camera;
      continue;
    }
    out.entries.push_back({i, q[0] / q[3] / d, q[1] / q[3] / d, d});
  }
  return out;
}

}  // namespace gadc
