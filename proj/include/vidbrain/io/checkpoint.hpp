// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vidbrain/nn/tensor.hpp"

namespace vidbrain::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  nn::Shape shape;
  std::vector<double> values;
};

/// Versioned binary container. Layout (little-endian):
///   "VBCK" u32 version
///   str stage, str config_json, str rng_state, str parent_hash
///   u64 epoch, u64 n_arrays, then per array: str name, u32 rank, u64 dims[rank], f64 data[]
/// where str is u64 length followed by raw bytes.
struct Checkpoint {
  std::string stage;
  std::string config_json;
  std::string rng_state;
  std::string parent_hash;  // content hash of the checkpoint this one depends on
  std::uint64_t epoch = 0;
  std::vector<NamedArray> arrays;

  const NamedArray& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::string serialize(const Checkpoint& ckpt);
/// Throws std::runtime_error on bad magic, version or truncation.
Checkpoint deserialize(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// SHA-256 of the serialized bytes.
std::string content_hash(const Checkpoint& ckpt);

std::string checkpoint_name(const std::string& stage, std::uint64_t seed, std::uint64_t epoch);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace vidbrain::io
