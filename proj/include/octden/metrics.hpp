#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "octden/error.hpp"
#include "octden/image.hpp"

namespace octden {

/// Binary region of interest, one byte per pixel (nonzero = inside).
using RoiMask = std::vector<std::uint8_t>;

namespace detail {
inline void check_roi(const RoiMask* roi, const Image& img) {
  if (roi && roi->size() != img.size()) throw ShapeError("ROI mask size does not match image");
}
}  // namespace detail

inline double mse(const Image& a, const Image& b, const RoiMask* roi = nullptr) {
  require_same_dims(a, b, "mse");
  detail::check_roi(roi, a);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (roi && !(*roi)[i]) continue;
    const double d = a[i] - b[i];
    sum += d * d;
    ++n;
  }
  if (n == 0) throw InputError("mse: empty region of interest");
  return sum / static_cast<double>(n);
}

/// 10 log10(peak^2 / MSE) in dB. std::nullopt means the images are
/// identical (MSE == 0), which has no finite PSNR.
inline std::optional<double> psnr(const Image& test, const Image& reference, double peak = 1.0,
                                  const RoiMask* roi = nullptr) {
  if (!(peak > 0.0)) throw InputError("psnr: peak must be > 0");
  const double e = mse(test, reference, roi);
  if (e == 0.0) return std::nullopt;
  return 10.0 * std::log10(peak * peak / e);
}

struct SsimConfig {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  std::size_t window = 11;
  double sigma = 1.5;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

namespace detail {

inline std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
  std::vector<double> k(size);
  const double c = static_cast<double>(size - 1) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable "valid" filtering: output is (h - k + 1) x (w - k + 1).
inline std::vector<double> filter_valid(std::span<const double> src, std::size_t h, std::size_t w,
                                        const std::vector<double>& k) {
  const std::size_t n = k.size(), ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * src[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Per-pixel SSIM over every fully interior window position; the map is
/// (h - window + 1) x (w - window + 1).
inline Image ssim_map(const Image& a, const Image& b, const SsimConfig& cfg = {}) {
  require_same_dims(a, b, "ssim");
  const std::size_t h = a.height(), w = a.width(), n = cfg.window;
  if (n == 0 || n % 2 == 0) throw InputError("ssim: window must be odd");
  if (h < n || w < n) {
    throw InputError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                     " is smaller than the " + std::to_string(n) + "x" + std::to_string(n) +
                     " window");
  }
  const auto k = detail::gaussian_kernel(n, cfg.sigma);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = detail::filter_valid(a.pixels(), h, w, k);
  const auto mu_b = detail::filter_valid(b.pixels(), h, w, k);
  const auto e_aa = detail::filter_valid(aa, h, w, k);
  const auto e_bb = detail::filter_valid(bb, h, w, k);
  const auto e_ab = detail::filter_valid(ab, h, w, k);
  const double c1 = cfg.c1(), c2 = cfg.c2();
  Image map(h - n + 1, w - n + 1);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    map[i] = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return map;
}

/// Mean SSIM. With an ROI, only windows centred inside it are averaged.
inline double ssim(const Image& a, const Image& b, const SsimConfig& cfg = {},
                   const RoiMask* roi = nullptr) {
  detail::check_roi(roi, a);
  const Image map = ssim_map(a, b, cfg);
  const std::size_t r = cfg.window / 2;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y < map.height(); ++y)
    for (std::size_t x = 0; x < map.width(); ++x) {
      if (roi && !(*roi)[(y + r) * a.width() + x + r]) continue;
      sum += map.at(y, x);
      ++count;
    }
  if (count == 0) throw InputError("ssim: no window centred inside the region of interest");
  return sum / static_cast<double>(count);
}

}  // namespace octden
