#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "octden/error.hpp"
#include "octden/image.hpp"

namespace octden {

namespace detail {
inline std::size_t clamp_index(long i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
}
}  // namespace detail

/// Median of the window x window neighbourhood, edges replicated.
inline Image median_filter(const Image& img, std::size_t window) {
  if (window == 0 || window % 2 == 0) throw InputError("median_filter: window must be odd");
  if (window == 1) return img;
  const long r = static_cast<long>(window / 2);
  const std::size_t h = img.height(), w = img.width();
  Image out(h, w);
  std::vector<double> buf(window * window);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t n = 0;
      for (long dy = -r; dy <= r; ++dy) {
        const std::size_t sy = detail::clamp_index(static_cast<long>(y) + dy, h);
        for (long dx = -r; dx <= r; ++dx)
          buf[n++] = img.at(sy, detail::clamp_index(static_cast<long>(x) + dx, w));
      }
      auto mid = buf.begin() + static_cast<long>(buf.size() / 2);
      std::nth_element(buf.begin(), mid, buf.end());
      out.at(y, x) = *mid;
    }
  return out;
}

struct NlmParams {
  std::size_t patch_radius = 3;
  std::size_t search_radius = 7;
  double h = 0.1;
};

/// Non-local means. Weight w(p,q) = exp(-d(p,q) / h^2) with d the mean squared
/// difference of the (2f+1)^2 patches; the centre pixel takes the largest
/// weight among the other candidates. Edges are replicated for both patches
/// and search positions. Patch distances are box sums over a per-offset
/// integral image.
inline Image nlm_filter(const Image& img, const NlmParams& prm) {
  if (prm.patch_radius < 1 || prm.search_radius < 1) {
    throw InputError("nlm_filter: radii must be >= 1");
  }
  if (!(prm.h > 0.0)) throw InputError("nlm_filter: h must be > 0");
  const std::size_t h = img.height(), w = img.width();
  const long f = static_cast<long>(prm.patch_radius);
  const long s = static_cast<long>(prm.search_radius);
  // Padded by f + s so every patch of every search candidate is addressable.
  const long pad = f + s;
  const std::size_t ph = h + 2 * static_cast<std::size_t>(pad);
  const std::size_t pw = w + 2 * static_cast<std::size_t>(pad);
  std::vector<double> P(ph * pw);
  for (std::size_t y = 0; y < ph; ++y)
    for (std::size_t x = 0; x < pw; ++x)
      P[y * pw + x] = img.at(detail::clamp_index(static_cast<long>(y) - pad, h),
                             detail::clamp_index(static_cast<long>(x) - pad, w));
  auto padded = [&](long y, long x) { return P[static_cast<std::size_t>(y + pad) * pw + static_cast<std::size_t>(x + pad)]; };

  const double inv_h2 = 1.0 / (prm.h * prm.h);
  const double patch_area = static_cast<double>((2 * f + 1) * (2 * f + 1));
  std::vector<double> wsum(h * w, 0.0), vsum(h * w, 0.0), wmax(h * w, 0.0);

  // Integral image over the region needed for centres p in the image:
  // rows/cols [-f, h+f) of the difference map for the current offset.
  const std::size_t ih = h + 2 * static_cast<std::size_t>(f) + 1;
  const std::size_t iw = w + 2 * static_cast<std::size_t>(f) + 1;
  std::vector<double> integ(ih * iw);
  for (long oy = -s; oy <= s; ++oy)
    for (long ox = -s; ox <= s; ++ox) {
      if (oy == 0 && ox == 0) continue;
      std::fill(integ.begin(), integ.begin() + static_cast<long>(iw), 0.0);
      for (std::size_t yy = 1; yy < ih; ++yy) {
        const long y = static_cast<long>(yy) - 1 - f;
        double row = 0.0;
        integ[yy * iw] = 0.0;
        for (std::size_t xx = 1; xx < iw; ++xx) {
          const long x = static_cast<long>(xx) - 1 - f;
          const double d = padded(y, x) - padded(y + oy, x + ox);
          row += d * d;
          integ[yy * iw + xx] = integ[(yy - 1) * iw + xx] + row;
        }
      }
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          // patch rows [y-f, y+f] -> integral rows [y, y+2f+1)
          const std::size_t y0 = y, y1 = y + 2 * static_cast<std::size_t>(f) + 1;
          const std::size_t x0 = x, x1 = x + 2 * static_cast<std::size_t>(f) + 1;
          const double ssd = integ[y1 * iw + x1] - integ[y0 * iw + x1] - integ[y1 * iw + x0] +
                             integ[y0 * iw + x0];
          const double wt = std::exp(-std::max(0.0, ssd) / patch_area * inv_h2);
          const std::size_t i = y * w + x;
          wsum[i] += wt;
          vsum[i] += wt * padded(static_cast<long>(y) + oy, static_cast<long>(x) + ox);
          wmax[i] = std::max(wmax[i], wt);
        }
    }
  Image out(h, w);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double self_w = wmax[i];
    const double total = wsum[i] + self_w;
    out[i] = total > 0.0 ? (vsum[i] + self_w * img[i]) / total : img[i];
  }
  return out;
}

}  // namespace octden
