// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vidbrain/io/hash.hpp"

namespace vidbrain::io {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

namespace {

constexpr char kMagic[4] = {'V', 'B', 'C', 'K'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_str() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void get_doubles(std::vector<double>& out, std::size_t n) {
    need(n * sizeof(double));
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw std::runtime_error("checkpoint: truncated data");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedArray& Checkpoint::get(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw std::runtime_error("checkpoint: missing array '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

std::string serialize(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_str(out, ckpt.stage);
  put_str(out, ckpt.config_json);
  put_str(out, ckpt.rng_state);
  put_str(out, ckpt.parent_hash);
  put<std::uint64_t>(out, ckpt.epoch);
  put<std::uint64_t>(out, ckpt.arrays.size());
  for (const auto& a : ckpt.arrays) {
    if (nn::shape_numel(a.shape) != a.values.size())
      throw std::invalid_argument("checkpoint: array '" + a.name + "' shape/data mismatch");
    put_str(out, a.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(double));
  }
  return out;
}

Checkpoint deserialize(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  Reader r(bytes);
  r.get<std::uint32_t>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.stage = r.get_str();
  c.config_json = r.get_str();
  c.rng_state = r.get_str();
  c.parent_hash = r.get_str();
  c.epoch = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    NamedArray a;
    a.name = r.get_str();
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(r.get<std::uint64_t>());
    r.get_doubles(a.values, nn::shape_numel(a.shape));
    c.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, serialize(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::string content_hash(const Checkpoint& ckpt) { return sha256_hex(serialize(ckpt)); }

std::string checkpoint_name(const std::string& stage, std::uint64_t seed, std::uint64_t epoch) {
  return stage + "-" + std::to_string(seed) + "-" + std::to_string(epoch) + ".ckpt";
}

}  // namespace vidbrain::io
