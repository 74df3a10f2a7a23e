// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/encoding/features.hpp"

#include <stdexcept>

namespace vidbrain::encoding {

std::string_view reducer_name(Reducer r) { return r == Reducer::kPool ? "pool" : "flatten"; }

Reducer parse_reducer(std::string_view s) {
  if (s == "pool") return Reducer::kPool;
  if (s == "flatten") return Reducer::kFlatten;
  throw std::invalid_argument("reducer must be 'pool' or 'flatten', got '" + std::string(s) + "'");
}

std::vector<double> reduce(const nn::Tensor& a, Reducer r) {
  if (r == Reducer::kFlatten) return a.to_vector();
  const nn::Shape& s = a.shape();
  std::size_t groups = 1, positions = 0, width = 0;
  if (s.size() == 5 && s[0] == 1) {
    positions = s[1] * s[2] * s[3];
    width = s[4];
  } else if (s.size() == 6 && s[0] == 1) {
    groups = s[1];
    positions = s[2] * s[3] * s[4];
    width = s[5];
  } else {
    throw std::invalid_argument("reduce: unexpected activation shape " + nn::shape_str(s));
  }
  std::vector<double> out(groups * width, 0.0);
  const auto d = a.data();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t c = 0; c < width; ++c) out[g * width + c] += d[(g * positions + p) * width + c];
  for (double& v : out) v /= static_cast<double>(positions);
  return out;
}

FeatureSequence extract_features(const prior::Prior& model, const vqvae::WindowCache& cache,
                                 const synth::FrameStream& stream, std::string_view tap, Reducer reducer) {
  FeatureSequence f;
  nn::NoGradGuard guard;
  for (std::size_t i = 0; i < cache.size(); ++i) {
    nn::Tensor act;
    if (i == 0) {
      act = model.tap_activation(tap, cache.codes[i], nullptr);
    } else {
      const nn::Tensor ctx = cache.context(i - 1);
      act = model.tap_activation(tap, cache.codes[i], &ctx);
    }
    const std::vector<double> v = reduce(act, reducer);
    if (f.dim == 0) f.dim = v.size();
    f.values.insert(f.values.end(), v.begin(), v.end());
    f.centers.push_back(stream.window_center(cache.windows[i]));
  }
  return f;
}

FeatureSequence extract_features(const prior::Prior& model, const vqvae::Vqvae& vq, const synth::FrameStream& stream,
                                 std::string_view tap, Reducer reducer) {
  return extract_features(model, vqvae::encode_windows(vq, stream, 0, stream.n_windows()), stream, tap, reducer);
}

}  // namespace vidbrain::encoding
