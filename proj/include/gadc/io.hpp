// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats: binary PPM/PGM images (16-bit depth in millimeters,
// big-endian per the PGM spec), camera JSON, and the per-sample directory
// layout. Parse failures report the byte offset.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gadc/geometry.hpp"

namespace gadc {

namespace pnm {

inline void fail(const std::string& path, std::istream& in,
                 const std::string& what) {
  const auto pos = in.tellg();
  throw input_error(path + ": " + what + " at byte " +
                    std::to_string(pos < 0 ? -1 : static_cast<long long>(pos)));
}

// Next whitespace-delimited header token, skipping '#' comments.
inline std::string token(const std::string& path, std::istream& in) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF) fail(path, in, "unexpected end of header");
  std::string t;
  while (c != EOF && !std::isspace(c)) {
    t.push_back(static_cast<char>(c));
    c = in.get();
  }
  return t;
}

inline std::size_t uint_token(const std::string& path, std::istream& in) {
  const std::string t = token(path, in);
  for (const char ch : t)
    if (!std::isdigit(static_cast<unsigned char>(ch)))
      fail(path, in, "expected integer, got '" + t + "'");
  return static_cast<std::size_t>(std::stoull(t));
}

struct Header {
  std::string magic;
  std::size_t width, height, maxval;
};

inline Header read_header(const std::string& path, std::istream& in,
                          const char* want_magic) {
  Header h;
  h.magic = token(path, in);
  if (h.magic != want_magic)
    fail(path, in, std::string("expected ") + want_magic + " magic");
  h.width = uint_token(path, in);
  h.height = uint_token(path, in);
  h.maxval = uint_token(path, in);
  return h;  // the single whitespace after maxval was consumed by token()
}

inline std::vector<std::uint8_t> read_payload(const std::string& path,
                                              std::istream& in,
                                              std::size_t bytes) {
  std::vector<std::uint8_t> buf(bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    fail(path, in, "truncated pixel data");
  return buf;
}

}  // namespace pnm

inline void write_ppm(const std::string& path, const std::vector<double>& rgb,
                      std::size_t height, std::size_t width) {
  if (rgb.size() != 3 * height * width)
    throw input_error("write_ppm: rgb buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open " + path + " for writing");
  out << "P6\n" << width << " " << height << "\n255\n";
  std::vector<std::uint8_t> buf(3 * height * width);
  for (std::size_t p = 0; p < height * width; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::min(1.0, std::max(0.0, rgb[c * height * width + p]));
      buf[3 * p + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

// Returns planar [3,H,W] values in [0,1].
inline std::vector<double> read_ppm(const std::string& path,
                                    std::size_t& height, std::size_t& width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path);
  const auto h = pnm::read_header(path, in, "P6");
  if (h.maxval != 255) pnm::fail(path, in, "unsupported maxval");
  height = h.height;
  width = h.width;
  const auto buf = pnm::read_payload(path, in, 3 * h.width * h.height);
  std::vector<double> rgb(3 * h.width * h.height);
  for (std::size_t p = 0; p < h.width * h.height; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      rgb[c * h.width * h.height + p] = buf[3 * p + c] / 255.0;
  return rgb;
}

// Depth in meters stored as big-endian 16-bit millimeters.
inline void write_depth_pgm(const std::string& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open " + path + " for writing");
  out << "P5\n" << depth.width() << " " << depth.height() << "\n65535\n";
  std::vector<std::uint8_t> buf(2 * depth.values().size());
  for (std::size_t i = 0; i < depth.values().size(); ++i) {
    const double mm = std::min(65535.0, std::max(0.0, depth.values()[i] * 1000.0));
    const auto q = static_cast<std::uint16_t>(std::lround(mm));
    buf[2 * i] = static_cast<std::uint8_t>(q >> 8);
    buf[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

inline DepthMap read_depth_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path);
  const auto h = pnm::read_header(path, in, "P5");
  if (h.maxval != 65535) pnm::fail(path, in, "expected 16-bit PGM");
  const auto buf = pnm::read_payload(path, in, 2 * h.width * h.height);
  DepthMap d(h.height, h.width);
  for (std::size_t i = 0; i < d.values().size(); ++i) {
    const std::uint16_t q = static_cast<std::uint16_t>(
        (static_cast<std::uint16_t>(buf[2 * i]) << 8) | buf[2 * i + 1]);
    d.values()[i] = q / 1000.0;
  }
  return d;
}

inline void write_gray_pgm(const std::string& path,
                           const std::vector<std::uint8_t>& gray,
                           std::size_t height, std::size_t width) {
  if (gray.size() != height * width)
    throw input_error("write_gray_pgm: buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open " + path + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()),
            static_cast<std::streamsize>(gray.size()));
}

inline std::vector<std::uint8_t> read_gray_pgm(const std::string& path,
                                               std::size_t& height,
                                               std::size_t& width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path);
  const auto h = pnm::read_header(path, in, "P5");
  if (h.maxval != 255) pnm::fail(path, in, "expected 8-bit PGM");
  height = h.height;
  width = h.width;
  return pnm::read_payload(path, in, h.width * h.height);
}

inline void write_camera_json(const std::string& path, const CameraModel& cam) {
  nlohmann::json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["extrinsics"] = cam.extrinsics.m;
  std::ofstream out(path);
  if (!out) throw input_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

inline CameraModel read_camera_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw input_error(path + ": " + e.what() + " at byte " +
                      std::to_string(e.byte));
  }
  CameraModel cam;
  try {
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<std::size_t>();
    cam.height = j.at("height").get<std::size_t>();
    const auto ext = j.at("extrinsics").get<std::vector<double>>();
    if (ext.size() != 16)
      throw input_error(path + ": extrinsics must hold 16 values");
    std::copy(ext.begin(), ext.end(), cam.extrinsics.m.begin());
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": " + e.what());
  }
  cam.validate();
  return cam;
}

struct SceneSample {
  std::vector<double> rgb;  // planar [3,H,W] in [0,1]
  DepthMap raw_depth, gt_depth;
  std::vector<std::uint8_t> mask;  // 1 = transparent/specular
  CameraModel camera;
  std::string id;
};

inline void save_sample(const std::string& dir, const SceneSample& s) {
  std::filesystem::create_directories(dir);
  write_ppm(dir + "/rgb.ppm", s.rgb, s.raw_depth.height(), s.raw_depth.width());
  write_depth_pgm(dir + "/raw_depth.pgm", s.raw_depth);
  write_depth_pgm(dir + "/gt_depth.pgm", s.gt_depth);
  std::vector<std::uint8_t> m(s.mask.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = s.mask[i] ? 255 : 0;
  write_gray_pgm(dir + "/mask.pgm", m, s.raw_depth.height(),
                 s.raw_depth.width());
  write_camera_json(dir + "/camera.json", s.camera);
}

inline SceneSample load_sample(const std::string& dir) {
  SceneSample s;
  std::size_t h = 0, w = 0;
  s.rgb = read_ppm(dir + "/rgb.ppm", h, w);
  s.raw_depth = read_depth_pgm(dir + "/raw_depth.pgm");
  s.gt_depth = read_depth_pgm(dir + "/gt_depth.pgm");
  std::size_t mh = 0, mw = 0;
  const auto m = read_gray_pgm(dir + "/mask.pgm", mh, mw);
  if (s.raw_depth.height() != h || s.raw_depth.width() != w ||
      s.gt_depth.height() != h || s.gt_depth.width() != w || mh != h || mw != w)
    throw input_error(dir + ": sample images have mismatched sizes");
  s.mask.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) s.mask[i] = m[i] >= 128 ? 1 : 0;
  s.camera = read_camera_json(dir + "/camera.json");
  if (s.camera.height != h || s.camera.width != w)
    throw input_error(dir + ": camera size does not match images");
  s.id = std::filesystem::path(dir).filename().string();
  return s;
}

// Sorted immediate subdirectories that look like samples.
inline std::vector<std::string> list_sample_dirs(const std::string& root) {
  std::vector<std::string> dirs;
  if (!std::filesystem::is_directory(root))
    throw input_error("dataset directory not found: " + root);
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() &&
        std::filesystem::exists(e.path() / "camera.json"))
      dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw input_error("no samples found under " + root);
  return dirs;
}

}  // namespace gadc
