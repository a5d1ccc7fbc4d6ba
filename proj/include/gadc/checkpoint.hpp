// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint format. Little-endian throughout:
//   magic "GAAT" | u32 version | u32 entry count
//   per entry: u16 name length | name bytes | u8 dtype | u8 rank |
//              rank x u32 dims | payload
// dtype 0 = f32 (parameters), 1 = f64, 2 = u32, 3 = u64. Optimizer slots are
// stored under "__opt__m/<param>" and "__opt__v/<param>", the shared step
// counter under "__opt__/t", and run metadata under "__meta__/...".

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gadc/common.hpp"
#include "gadc/nn.hpp"
#include "gadc/optim.hpp"

namespace gadc {

inline constexpr char kCheckpointMagic[4] = {'G', 'A', 'A', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class EntryType : std::uint8_t { kF32 = 0, kF64 = 1, kU32 = 2, kU64 = 3 };

struct CheckpointEntry {
  std::string name;
  EntryType dtype = EntryType::kF32;
  Shape shape;
  std::vector<std::uint8_t> payload;

  std::size_t numel() const { return shape_numel(shape); }

  std::vector<float> as_f32() const {
    if (dtype != EntryType::kF32) throw input_error("entry " + name + ": not f32");
    std::vector<float> out(numel());
    std::memcpy(out.data(), payload.data(), out.size() * sizeof(float));
    return out;
  }
  std::uint32_t as_u32() const {
    if (dtype != EntryType::kU32 || numel() != 1)
      throw input_error("entry " + name + ": not scalar u32");
    std::uint32_t v;
    std::memcpy(&v, payload.data(), sizeof(v));
    return v;
  }
  std::uint64_t as_u64() const {
    if (dtype != EntryType::kU64 || numel() != 1)
      throw input_error("entry " + name + ": not scalar u64");
    std::uint64_t v;
    std::memcpy(&v, payload.data(), sizeof(v));
    return v;
  }
};

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  std::uint8_t buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i)
    buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
  put_bytes(os, buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const char* what) {
  std::uint8_t buf[sizeof(U)];
  is.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (!is) throw input_error(std::string("checkpoint truncated reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void write_entry(std::ostream& os, const std::string& name,
                        EntryType dtype, const Shape& shape, const void* data,
                        std::size_t bytes) {
  if (name.size() > 0xffff) throw input_error("checkpoint entry name too long");
  put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  put_bytes(os, name.data(), name.size());
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(dtype));
  if (shape.size() > 0xff) throw input_error("checkpoint entry rank too large");
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(shape.size()));
  for (const auto d : shape) {
    if (d > 0xffffffffull) throw input_error("checkpoint dim too large");
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  }
  put_bytes(os, data, bytes);
}

inline void write_f32(std::ostream& os, const std::string& name,
                      const Shape& shape, const std::vector<float>& v) {
  write_entry(os, name, EntryType::kF32, shape, v.data(),
              v.size() * sizeof(float));
}

inline void write_u32_scalar(std::ostream& os, const std::string& name,
                             std::uint32_t v) {
  write_entry(os, name, EntryType::kU32, Shape{}, &v, sizeof(v));
}

inline void write_u64_scalar(std::ostream& os, const std::string& name,
                             std::uint64_t v) {
  write_entry(os, name, EntryType::kU64, Shape{}, &v, sizeof(v));
}

inline std::size_t dtype_size(EntryType t) {
  switch (t) {
    case EntryType::kF32: return 4;
    case EntryType::kF64: return 8;
    case EntryType::kU32: return 4;
    case EntryType::kU64: return 8;
  }
  throw input_error("checkpoint: unknown dtype code");
}

}  // namespace detail

struct Checkpoint {
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
  const CheckpointEntry& at(const std::string& name) const {
    if (const auto* e = find(name)) return *e;
    throw input_error("checkpoint missing entry: " + name);
  }
};

inline void save_checkpoint(const std::filesystem::path& path,
                            const ParamStore<float>& params,
                            const Adam<float>* opt, std::uint32_t epoch,
                            std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw input_error("cannot open checkpoint for write: " + path.string());
  std::size_t count = params.items().size() + 3;  // __opt__/t + two __meta__
  if (opt) count += 2 * params.items().size();
  detail::put_bytes(os, kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(count));
  for (const auto& [name, tensor] : params.items()) {
    const auto& v = tensor.vals();
    detail::write_f32(os, name, tensor.shape(),
                      std::vector<float>(v.begin(), v.end()));
  }
  for (const auto& [name, tensor] : params.items()) {
    if (!opt) break;
    detail::write_f32(os, "__opt__m/" + name, tensor.shape(),
                      opt->first_moment(name, tensor.numel()));
    detail::write_f32(os, "__opt__v/" + name, tensor.shape(),
                      opt->second_moment(name, tensor.numel()));
  }
  detail::write_u64_scalar(os, "__opt__/t", opt ? opt->steps() : 0);
  detail::write_u32_scalar(os, "__meta__/epoch", epoch);
  detail::write_u64_scalar(os, "__meta__/config_hash", config_hash);
  os.flush();
  if (!os) throw input_error("checkpoint write failed: " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw input_error("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw input_error("not a checkpoint file: " + path.string());
  const auto version = detail::get_le<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw input_error("unsupported checkpoint version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(is, "entry count");
  Checkpoint ck;
  ck.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const auto name_len = detail::get_le<std::uint16_t>(is, "name length");
    e.name.resize(name_len);
    is.read(e.name.data(), name_len);
    if (!is) throw input_error("checkpoint truncated reading name");
    const auto dtype = detail::get_le<std::uint8_t>(is, "dtype");
    if (dtype > 3) throw input_error("checkpoint: unknown dtype code in " + e.name);
    e.dtype = static_cast<EntryType>(dtype);
    const auto rank = detail::get_le<std::uint8_t>(is, "rank");
    e.shape.resize(rank);
    for (std::uint8_t r = 0; r < rank; ++r)
      e.shape[r] = detail::get_le<std::uint32_t>(is, "dim");
    const std::size_t bytes = e.numel() * detail::dtype_size(e.dtype);
    e.payload.resize(bytes);
    is.read(reinterpret_cast<char*>(e.payload.data()),
            static_cast<std::streamsize>(bytes));
    if (!is) throw input_error("checkpoint truncated reading " + e.name);
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

struct LoadedMeta {
  std::uint32_t epoch = 0;
  std::uint64_t config_hash = 0;
};

// Restores parameters (and optimizer state when `opt` is non-null) in place.
// Every parameter must be present with a matching shape.
inline LoadedMeta load_checkpoint(const std::filesystem::path& path,
                                  ParamStore<float>& params,
                                  Adam<float>* opt) {
  const Checkpoint ck = read_checkpoint(path);
  for (auto& [name, tensor] : params.items()) {
    const auto& e = ck.at(name);
    if (e.shape != tensor.shape())
      throw input_error("checkpoint shape mismatch for " + name + ": file " +
                        shape_str(e.shape) + " vs model " +
                        shape_str(tensor.shape()));
    const auto data = e.as_f32();
    auto& dst = tensor.vals_mut();
    std::copy(data.begin(), data.end(), dst.begin());
  }
  if (opt) {
    opt->set_steps(ck.at("__opt__/t").as_u64());
    for (auto& [name, tensor] : params.items()) {
      const auto* m = ck.find("__opt__m/" + name);
      const auto* v = ck.find("__opt__v/" + name);
      if (!m || !v) {
        opt->clear_slot(name);
        continue;
      }
      if (m->shape != tensor.shape() || v->shape != tensor.shape())
        throw input_error("checkpoint optimizer shape mismatch for " + name);
      opt->set_slot(name, m->as_f32(), v->as_f32());
    }
  }
  LoadedMeta meta;
  meta.epoch = ck.at("__meta__/epoch").as_u32();
  meta.config_hash = ck.at("__meta__/config_hash").as_u64();
  return meta;
}

}  // namespace gadc
