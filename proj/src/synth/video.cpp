// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/synth/video.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "vidbrain/io/checkpoint.hpp"

namespace vidbrain::synth {

namespace {

struct Sprite {
  double x, y, vx, vy;
  std::size_t size;
  std::array<std::uint8_t, 3> color;
  bool disc;
};

using Rng = std::mt19937_64;

std::array<std::uint8_t, 3> random_color(Rng& rng) {
  std::uniform_int_distribution<int> c(0, 255);
  return {static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng))};
}

void new_velocity(Sprite& s, const SynthSceneSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> v(-spec.max_speed, spec.max_speed);
  if (spec.static_sprites) {
    s.vx = s.vy = 0.0;
    return;
  }
  s.vx = v(rng);
  s.vy = v(rng);
}

std::vector<Sprite> new_scene(const SynthSceneSpec& spec, Rng& rng, std::array<std::uint8_t, 3>& bg) {
  bg = random_color(rng);
  std::vector<Sprite> out;
  std::uniform_int_distribution<std::size_t> sz(spec.min_sprite, spec.max_sprite);
  std::bernoulli_distribution disc(0.5);
  for (std::size_t i = 0; i < spec.sprites; ++i) {
    Sprite s{};
    s.size = sz(rng);
    std::uniform_real_distribution<double> pos(0.0, static_cast<double>(spec.frame_size - s.size));
    s.x = pos(rng);
    s.y = pos(rng);
    new_velocity(s, spec, rng);
    s.color = random_color(rng);
    s.disc = disc(rng);
    out.push_back(s);
  }
  return out;
}

void render(const std::vector<Sprite>& sprites, const std::array<std::uint8_t, 3>& bg, std::size_t n,
            std::uint8_t* frame) {
  for (std::size_t i = 0; i < n * n; ++i) std::memcpy(frame + 3 * i, bg.data(), 3);
  for (const auto& s : sprites) {
    const auto x0 = static_cast<long>(std::lround(s.x)), y0 = static_cast<long>(std::lround(s.y));
    const double r = static_cast<double>(s.size) / 2.0;
    for (std::size_t dy = 0; dy < s.size; ++dy)
      for (std::size_t dx = 0; dx < s.size; ++dx) {
        if (s.disc) {
          const double cx = static_cast<double>(dx) + 0.5 - r, cy = static_cast<double>(dy) + 0.5 - r;
          if (cx * cx + cy * cy > r * r) continue;
        }
        const long px = x0 + static_cast<long>(dx), py = y0 + static_cast<long>(dy);
        if (px < 0 || py < 0 || px >= static_cast<long>(n) || py >= static_cast<long>(n)) continue;
        std::memcpy(frame + 3 * (static_cast<std::size_t>(py) * n + static_cast<std::size_t>(px)), s.color.data(), 3);
      }
  }
}

void advance(std::vector<Sprite>& sprites, const SynthSceneSpec& spec, Rng& rng) {
  const double hi_base = static_cast<double>(spec.frame_size);
  std::bernoulli_distribution turn(spec.turn_frames ? 1.0 / static_cast<double>(spec.turn_frames) : 0.0);
  for (auto& s : sprites) {
    if (spec.turn_frames && turn(rng)) new_velocity(s, spec, rng);
    const double hi = hi_base - static_cast<double>(s.size);
    s.x += s.vx;
    s.y += s.vy;
    if (s.x < 0) { s.x = -s.x; s.vx = -s.vx; }
    if (s.y < 0) { s.y = -s.y; s.vy = -s.vy; }
    if (s.x > hi) { s.x = 2 * hi - s.x; s.vx = -s.vx; }
    if (s.y > hi) { s.y = 2 * hi - s.y; s.vy = -s.vy; }
  }
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T)) throw std::runtime_error("frame stream: truncated file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void SynthSceneSpec::validate() const {
  if (frame_size == 0 || frame_size % 4 != 0)
    throw std::invalid_argument("scene spec: frame size must be a positive multiple of 4");
  if (!(fps > 0)) throw std::invalid_argument("scene spec: fps must be > 0");
  if (min_sprite == 0 || min_sprite > max_sprite || max_sprite > frame_size)
    throw std::invalid_argument("scene spec: sprite size range invalid");
  if (!(max_speed >= 0)) throw std::invalid_argument("scene spec: max_speed must be >= 0");
}

nlohmann::json SynthSceneSpec::to_json() const {
  return {{"seed", seed},           {"frame_size", frame_size}, {"fps", fps},
          {"sprites", sprites},     {"min_sprite", min_sprite}, {"max_sprite", max_sprite},
          {"max_speed", max_speed}, {"scene_frames", scene_frames}, {"turn_frames", turn_frames},
          {"static_sprites", static_sprites}};
}

SynthSceneSpec SynthSceneSpec::from_json(const nlohmann::json& j) {
  SynthSceneSpec s;
  s.seed = j.value("seed", s.seed);
  s.frame_size = j.value("frame_size", s.frame_size);
  s.fps = j.value("fps", s.fps);
  s.sprites = j.value("sprites", s.sprites);
  s.min_sprite = j.value("min_sprite", s.min_sprite);
  s.max_sprite = j.value("max_sprite", s.max_sprite);
  s.max_speed = j.value("max_speed", s.max_speed);
  s.scene_frames = j.value("scene_frames", s.scene_frames);
  s.turn_frames = j.value("turn_frames", s.turn_frames);
  s.static_sprites = j.value("static_sprites", s.static_sprites);
  return s;
}

nn::Tensor FrameStream::window(std::size_t w) const {
  if (w >= n_windows()) throw std::out_of_range("frame stream: window index out of range");
  const std::size_t n = kWindowFrames * frame_bytes();
  std::vector<double> v(n);
  const std::uint8_t* src = pixels.data() + w * n;
  for (std::size_t i = 0; i < n; ++i) v[i] = src[i] / 255.0;
  return nn::Tensor::from({kWindowFrames, frame_size, frame_size, channels}, std::move(v));
}

double FrameStream::window_center(std::size_t w) const {
  if (w >= n_windows()) throw std::out_of_range("frame stream: window index out of range");
  return (static_cast<double>(w * kWindowFrames) + (kWindowFrames - 1) / 2.0) / fps;
}

FrameStream gen_video(const SynthSceneSpec& spec, std::size_t n_frames) {
  spec.validate();
  if (n_frames < kWindowFrames) throw std::invalid_argument("gen_video: n_frames must be >= 16");
  Rng rng(spec.seed);
  FrameStream s;
  s.frame_size = spec.frame_size;
  s.fps = spec.fps;
  s.pixels.resize(n_frames * s.frame_bytes());
  s.timestamps.resize(n_frames);
  std::array<std::uint8_t, 3> bg{};
  std::vector<Sprite> sprites = new_scene(spec, rng, bg);
  for (std::size_t f = 0; f < n_frames; ++f) {
    if (f > 0) {
      if (spec.scene_frames && f % spec.scene_frames == 0)
        sprites = new_scene(spec, rng, bg);
      else
        advance(sprites, spec, rng);
    }
    render(sprites, bg, spec.frame_size, s.pixels.data() + f * s.frame_bytes());
    s.timestamps[f] = static_cast<double>(f) / spec.fps;
  }
  return s;
}

void write_frame_stream(const std::filesystem::path& path, const FrameStream& s) {
  std::string out("VBFS", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.frame_size));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.channels));
  put<double>(out, s.fps);
  put<std::uint64_t>(out, s.n_frames());
  out.append(reinterpret_cast<const char*>(s.timestamps.data()), s.timestamps.size() * sizeof(double));
  out.append(reinterpret_cast<const char*>(s.pixels.data()), s.pixels.size());
  io::write_file(path, out);
}

FrameStream read_frame_stream(const std::filesystem::path& path) {
  const std::string in = io::read_file(path);
  if (in.size() < 8 || in.compare(0, 4, "VBFS") != 0) throw std::runtime_error("frame stream: bad magic");
  std::size_t pos = 4;
  if (take<std::uint32_t>(in, pos) != 1) throw std::runtime_error("frame stream: unsupported version");
  FrameStream s;
  s.frame_size = take<std::uint32_t>(in, pos);
  s.channels = take<std::uint32_t>(in, pos);
  s.fps = take<double>(in, pos);
  const auto n = take<std::uint64_t>(in, pos);
  s.timestamps.resize(n);
  s.pixels.resize(n * s.frame_bytes());
  if (in.size() - pos != n * sizeof(double) + s.pixels.size()) throw std::runtime_error("frame stream: size mismatch");
  std::memcpy(s.timestamps.data(), in.data() + pos, n * sizeof(double));
  std::memcpy(s.pixels.data(), in.data() + pos + n * sizeof(double), s.pixels.size());
  return s;
}

}  // namespace vidbrain::synth
