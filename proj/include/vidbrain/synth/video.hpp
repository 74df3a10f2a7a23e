// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "vidbrain/nn/tensor.hpp"

namespace vidbrain::synth {

inline constexpr std::size_t kWindowFrames = 16;

struct SynthSceneSpec {
  std::uint64_t seed = 0;
  std::size_t frame_size = 32;
  double fps = 30.0;
  std::size_t sprites = 3;
  std::size_t min_sprite = 4;
  std::size_t max_sprite = 9;
  double max_speed = 1.5;          // pixels per frame
  std::size_t scene_frames = 128;  // frames between scene cuts; 0 = one scene
  std::size_t turn_frames = 48;    // mean frames between velocity changes; 0 = never
  bool static_sprites = false;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthSceneSpec from_json(const nlohmann::json& j);
};

/// RGB frames stored as bytes, with per-frame timestamps in seconds.
struct FrameStream {
  std::size_t frame_size = 0;
  std::size_t channels = 3;
  double fps = 30.0;
  std::vector<std::uint8_t> pixels;  // [n_frames, size, size, channels]
  std::vector<double> timestamps;

  std::size_t n_frames() const { return timestamps.size(); }
  std::size_t frame_bytes() const { return frame_size * frame_size * channels; }
  /// Number of complete non-overlapping 16-frame windows.
  std::size_t n_windows() const { return n_frames() / kWindowFrames; }
  /// Window w as [16, size, size, channels] in [0, 1].
  nn::Tensor window(std::size_t w) const;
  /// Center time of window w in seconds.
  double window_center(std::size_t w) const;
};

/// Moving sprites over a flat background with piecewise-constant velocities,
/// wall bounces and periodic scene cuts. Bit-deterministic in the spec.
/// Throws std::invalid_argument when n_frames < 16 or the spec is invalid.
FrameStream gen_video(const SynthSceneSpec& spec, std::size_t n_frames);

/// Versioned binary: "VBFS" u32 version, u32 size, u32 channels, f64 fps,
/// u64 n_frames, f64 timestamps[n], u8 pixels[].
void write_frame_stream(const std::filesystem::path& path, const FrameStream& s);
FrameStream read_frame_stream(const std::filesystem::path& path);

}  // namespace vidbrain::synth
