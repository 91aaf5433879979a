#pragma once

// Training and data scenarios shared by the unit tests and the acceptance
// runner.

#include <vector>

#include "oracles.hpp"

namespace scenarios {

using namespace octden;

/// Phantom pair at the given looks; the speckle seed differs from the
/// phantom seed so the two streams are independent.
inline PatchPair phantom_pair(std::size_t h, std::size_t w, std::uint64_t seed, double looks = 4.0) {
  const Image clean = make_phantom(h, w, seed);
  return {add_speckle(clean, SpeckleConfig{looks, seed * 7919 + 1}), clean};
}

/// Smooth test scene: a few Gaussian blobs on a vertical ramp.
inline Image blobs(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Blob {
    double y, x, s, a;
  };
  std::vector<Blob> bs;
  for (int i = 0; i < 6; ++i)
    bs.push_back({(0.2 + 0.6 * u(rng)) * h, (0.2 + 0.6 * u(rng)) * w, 4.0 + 6.0 * u(rng), 0.2 + 0.3 * u(rng)});
  Image img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double v = 0.1 + 0.2 * static_cast<double>(y) / static_cast<double>(h);
      for (const auto& b : bs) {
        const double dy = static_cast<double>(y) - b.y, dx = static_cast<double>(x) - b.x;
        v += b.a * std::exp(-(dy * dy + dx * dx) / (2 * b.s * b.s));
      }
      img.at(y, x) = std::min(v, 1.0);
    }
  return img;
}

/// Losses of `steps` optimizer steps on one repeated patch.
template <typename T>
std::vector<double> overfit_one(std::size_t width, std::size_t size, std::size_t steps,
                                std::uint64_t seed = 1) {
  const auto pair = phantom_pair(size, size, seed);
  const Tensor<T> noisy = to_tensor<T>(pair.noisy), clean = to_tensor<T>(pair.clean);
  NetworkSpec spec;
  spec.width = width;
  Trainer<T> trainer(make_network<T>(spec, seed), AdamConfig{});
  std::vector<double> losses;
  for (std::size_t s = 0; s < steps; ++s) losses.push_back(trainer.step(noisy, clean));
  return losses;
}

}  // namespace scenarios
