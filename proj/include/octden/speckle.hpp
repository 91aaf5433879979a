#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "octden/error.hpp"
#include "octden/image.hpp"

namespace octden {

struct SpeckleConfig {
  double looks = 4.0;  // gamma shape; multiplier variance is 1/looks
  std::uint64_t seed = 0;
};

/// clean * s per pixel with s ~ Gamma(looks, 1/looks) (unit mean), before clamping.
inline Image speckle_unclamped(const Image& clean, const SpeckleConfig& cfg) {
  if (!(cfg.looks > 0.0)) throw InputError("speckle looks must be > 0");
  std::mt19937_64 rng(cfg.seed);
  std::gamma_distribution<double> gamma(cfg.looks, 1.0 / cfg.looks);
  Image out(clean.height(), clean.width());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = clean[i] * gamma(rng);
  return out;
}

/// Multiplicative unit-mean gamma speckle, clamped to [0, 1].
inline Image add_speckle(const Image& clean, const SpeckleConfig& cfg) {
  return clamp01(speckle_unclamped(clean, cfg));
}

/// Synthetic retina-like B-scan: a dark vitreous band, a stack of wavy
/// horizontal layers with smooth lateral gradients, and a few elliptical
/// inclusions. Values stay inside [0.02, 0.95].
inline Image make_phantom(std::size_t height, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double H = static_cast<double>(height), W = static_cast<double>(width);
  const double pi = std::numbers::pi;

  const int layers = 4 + static_cast<int>(u(rng) * 3);
  const double top = H * (0.15 + 0.15 * u(rng));
  const double bottom = H * (0.80 + 0.12 * u(rng));
  std::vector<double> base(layers + 1), amp(layers + 1), freq(layers + 1), phase(layers + 1);
  for (int k = 0; k <= layers; ++k) {
    base[k] = top + (bottom - top) * k / layers;
    amp[k] = H * 0.03 * u(rng);
    freq[k] = 2.0 * pi * (0.5 + 1.5 * u(rng)) / W;
    phase[k] = 2.0 * pi * u(rng);
  }
  std::vector<double> level(layers), slope(layers);
  for (int k = 0; k < layers; ++k) {
    level[k] = 0.25 + 0.6 * u(rng);
    slope[k] = 0.2 * (u(rng) - 0.5);
  }
  const double bg = 0.04 + 0.06 * u(rng);

  struct Ellipse {
    double cy, cx, ry, rx, angle, value;
  };
  std::vector<Ellipse> ellipses;
  const int ne = 1 + static_cast<int>(u(rng) * 3);
  for (int e = 0; e < ne; ++e) {
    ellipses.push_back({top + (bottom - top) * u(rng), W * (0.1 + 0.8 * u(rng)),
                        H * (0.03 + 0.06 * u(rng)), W * (0.05 + 0.12 * u(rng)), pi * u(rng),
                        0.1 + 0.8 * u(rng)});
  }

  Image img(height, width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double xd = static_cast<double>(x), yd = static_cast<double>(y);
      double v = bg * (1.0 + 0.5 * yd / H);
      for (int k = 0; k < layers; ++k) {
        const double lo = base[k] + amp[k] * std::sin(freq[k] * xd + phase[k]);
        const double hi = base[k + 1] + amp[k + 1] * std::sin(freq[k + 1] * xd + phase[k + 1]);
        if (yd >= lo && yd < hi) v = level[k] * (1.0 + slope[k] * (xd / W - 0.5) * 2.0);
      }
      for (const auto& e : ellipses) {
        const double dx = xd - e.cx, dy = yd - e.cy;
        const double cs = std::cos(e.angle), sn = std::sin(e.angle);
        const double px = (cs * dx + sn * dy) / e.rx, py = (-sn * dx + cs * dy) / e.ry;
        if (px * px + py * py <= 1.0) v = e.value;
      }
      img.at(y, x) = std::clamp(v, 0.02, 0.95);
    }
  return img;
}

}  // namespace octden
