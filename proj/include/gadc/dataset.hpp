// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic desk scenes: a ray-cast render of a tilted backdrop plane plus
// spheres and boxes, a subset of which are flagged transparent/specular.
// Ground truth is true front-surface depth; the raw sensor image drops or
// corrupts depth inside the transparent mask.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gadc/common.hpp"
#include "gadc/io.hpp"

namespace gadc {

struct SceneObject {
  enum class Kind { kSphere, kBox } kind = Kind::kSphere;
  std::array<double, 3> center{};
  double radius = 0.1;                   // spheres
  std::array<double, 3> half_extent{};   // boxes
  std::array<double, 3> albedo{0.5, 0.5, 0.5};
  bool transparent = false;
};

struct SceneGeom {
  // backdrop plane z = z0 + ax*x + ay*y
  double plane_z0 = 2.0, plane_ax = 0.0, plane_ay = 0.0;
  std::array<double, 3> plane_albedo{0.6, 0.6, 0.6};
  std::vector<SceneObject> objects;
};

struct SceneSpec {
  std::size_t width = 64, height = 48;
  std::size_t min_objects = 3, max_objects = 8;
  double transparent_prob = 0.5;
  bool ensure_transparent = true;
  double hole_prob = 0.6;
  double noise_sigma = 0.005;  // meters
};

namespace render {

struct Hit {
  double z = std::numeric_limits<double>::infinity();
  std::array<double, 3> normal{0, 0, -1};
  const SceneObject* obj = nullptr;  // null = plane
};

// Rays go through pixel centers: p(t) = t * dir, dir = ((u-cx)/fx,
// (v-cy)/fy, 1), so the hit parameter t is the z-depth directly.
inline std::array<double, 3> pixel_ray(const CameraModel& cam, double u,
                                       double v) {
  return {(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0};
}

inline double plane_depth(const SceneGeom& g, const std::array<double, 3>& d) {
  const double denom = 1.0 - g.plane_ax * d[0] - g.plane_ay * d[1];
  if (denom <= 1e-9) return std::numeric_limits<double>::infinity();
  return g.plane_z0 / denom;
}

inline bool sphere_depth(const SceneObject& o, const std::array<double, 3>& d,
                         double& z_out, std::array<double, 3>& n_out) {
  const double a = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
  const double b = -2.0 * (d[0] * o.center[0] + d[1] * o.center[1] +
                           d[2] * o.center[2]);
  const double c = o.center[0] * o.center[0] + o.center[1] * o.center[1] +
                   o.center[2] * o.center[2] - o.radius * o.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  double t = (-b - sq) / (2.0 * a);
  if (t <= 1e-9) t = (-b + sq) / (2.0 * a);
  if (t <= 1e-9) return false;
  z_out = t;
  double inv_r = 1.0 / o.radius;
  for (int k = 0; k < 3; ++k) n_out[k] = (t * d[k] - o.center[k]) * inv_r;
  return true;
}

inline bool box_depth(const SceneObject& o, const std::array<double, 3>& d,
                      double& z_out, std::array<double, 3>& n_out) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int enter_axis = 2;
  double enter_sign = -1;
  for (int k = 0; k < 3; ++k) {
    const double lo = o.center[k] - o.half_extent[k];
    const double hi = o.center[k] + o.half_extent[k];
    if (d[k] == 0.0) {
      if (0.0 < lo || 0.0 > hi) return false;  // ray origin is (0,0,0)
      continue;
    }
    double t0 = lo / d[k], t1 = hi / d[k];
    double sign = -1;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1;
    }
    if (t0 > t_enter) {
      t_enter = t0;
      enter_axis = k;
      enter_sign = sign;
    }
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit || t_exit <= 1e-9 || t_enter <= 1e-9) return false;
  z_out = t_enter;
  n_out = {0, 0, 0};
  n_out[enter_axis] = enter_sign;
  return true;
}

// Nearest surface along the pixel ray; transparent objects can be skipped to
// emulate a sensor seeing through them.
inline Hit cast(const SceneGeom& g, const std::array<double, 3>& d,
                bool skip_transparent) {
  Hit best;
  best.z = plane_depth(g, d);
  // plane normal (-ax, -ay, 1) points toward the camera after negation
  const double nl = std::sqrt(g.plane_ax * g.plane_ax +
                              g.plane_ay * g.plane_ay + 1.0);
  best.normal = {g.plane_ax / nl, g.plane_ay / nl, -1.0 / nl};
  for (const auto& o : g.objects) {
    if (skip_transparent && o.transparent) continue;
    double z;
    std::array<double, 3> n;
    const bool hit = o.kind == SceneObject::Kind::kSphere
                         ? sphere_depth(o, d, z, n)
                         : box_depth(o, d, z, n);
    if (hit && z < best.z) {
      best.z = z;
      best.normal = n;
      best.obj = &o;
    }
  }
  return best;
}

inline std::array<double, 3> shade(const Hit& hit,
                                   const std::array<double, 3>& albedo) {
  static constexpr std::array<double, 3> kLight{0.36, -0.48, -0.8};
  double dot = 0;
  for (int k = 0; k < 3; ++k) dot += hit.normal[k] * kLight[k];
  const double lum = 0.3 + 0.7 * std::max(0.0, -dot);
  return {albedo[0] * lum, albedo[1] * lum, albedo[2] * lum};
}

}  // namespace render

inline CameraModel desk_camera(std::size_t width, std::size_t height) {
  CameraModel cam;
  cam.fx = cam.fy = 0.9 * static_cast<double>(width);
  cam.cx = (static_cast<double>(width) - 1.0) / 2.0;
  cam.cy = (static_cast<double>(height) - 1.0) / 2.0;
  cam.width = width;
  cam.height = height;
  cam.extrinsics = Mat4::identity();
  return cam;
}

inline SceneGeom sample_geometry(Rng& rng, const SceneSpec& spec) {
  if (spec.min_objects == 0 || spec.min_objects > spec.max_objects)
    throw input_error("scene spec: need 1 <= min_objects <= max_objects");
  SceneGeom g;
  g.plane_z0 = rng.uniform(0.7, 1.0);
  g.plane_ax = rng.uniform(-0.12, 0.12);
  g.plane_ay = rng.uniform(-0.12, 0.12);
  g.plane_albedo = {rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.8),
                    rng.uniform(0.3, 0.8)};
  const std::size_t count =
      spec.min_objects + rng.below(spec.max_objects - spec.min_objects + 1);
  for (std::size_t i = 0; i < count; ++i) {
    SceneObject o;
    o.kind = rng.uniform() < 0.5 ? SceneObject::Kind::kSphere
                                 : SceneObject::Kind::kBox;
    o.radius = rng.uniform(0.05, 0.15);
    o.half_extent = {rng.uniform(0.04, 0.12), rng.uniform(0.04, 0.12),
                     rng.uniform(0.04, 0.12)};
    // objects rest on the desk; lateral placement stays inside roughly the
    // central 70% of the view at desk depth
    const double span = 0.35 * g.plane_z0 / 0.9;
    const double x = rng.uniform(-span, span);
    const double y = rng.uniform(-span * 0.75, span * 0.75);
    const double sink =
        o.kind == SceneObject::Kind::kSphere ? o.radius : o.half_extent[2];
    o.center = {x, y,
                g.plane_z0 + g.plane_ax * x + g.plane_ay * y - sink - 0.005};
    o.albedo = {rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9),
                rng.uniform(0.2, 0.9)};
    o.transparent = rng.uniform() < spec.transparent_prob;
    g.objects.push_back(o);
  }
  if (spec.ensure_transparent && spec.transparent_prob > 0.0) {
    bool any = false;
    for (const auto& o : g.objects) any = any || o.transparent;
    if (!any) g.objects[rng.below(g.objects.size())].transparent = true;
  }
  return g;
}

// Renders ground truth and the corrupted raw depth. Inside the transparent
// mask the sensor either drops the return (probability hole_prob) or reports
// the surface behind the object plus Gaussian noise.
inline SceneSample render_sample(const SceneGeom& geom, const CameraModel& cam,
                                 const SceneSpec& spec, Rng& rng,
                                 const std::string& id) {
  const std::size_t h = cam.height, w = cam.width;
  SceneSample s;
  s.camera = cam;
  s.id = id;
  s.rgb.assign(3 * h * w, 0.0);
  s.gt_depth = DepthMap(h, w);
  s.raw_depth = DepthMap(h, w);
  s.mask.assign(h * w, 0);
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      const std::size_t p = v * w + u;
      const auto dir = render::pixel_ray(cam, static_cast<double>(u),
                                         static_cast<double>(v));
      const auto hit = render::cast(geom, dir, false);
      s.gt_depth.values()[p] = hit.z;
      const auto& albedo = hit.obj ? hit.obj->albedo : geom.plane_albedo;
      const auto color = render::shade(hit, albedo);
      for (int c = 0; c < 3; ++c) s.rgb[c * h * w + p] = color[c];
      if (hit.obj && hit.obj->transparent) {
        s.mask[p] = 1;
        if (rng.uniform() < spec.hole_prob) {
          s.raw_depth.values()[p] = 0.0;
        } else {
          const auto behind = render::cast(geom, dir, true);
          const double noisy =
              behind.z + rng.normal(0.0, spec.noise_sigma);
          s.raw_depth.values()[p] = std::max(0.01, noisy);
        }
      } else {
        s.raw_depth.values()[p] = hit.z;
      }
    }
  }
  return s;
}

// Deterministic end-to-end generation; a seed maps to exactly one sample.
// Regenerates (with a derived seed) in the rare case every transparent
// object ends up fully occluded, so the mask is never empty.
inline SceneSample generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed + 0x9e3779b97f4a7c15ull * attempt);
    const CameraModel cam = desk_camera(spec.width, spec.height);
    const SceneGeom geom = sample_geometry(rng, spec);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%06llu",
                  static_cast<unsigned long long>(seed));
    SceneSample s = render_sample(geom, cam, spec, rng, buf);
    bool has_mask = false;
    for (const auto m : s.mask) has_mask = has_mask || m != 0;
    if (has_mask || spec.transparent_prob <= 0.0 || !spec.ensure_transparent)
      return s;
  }
}

}  // namespace gadc
