#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "octden/error.hpp"
#include "octden/image.hpp"

namespace octden {

/// [a b tx; c d ty] mapping output pixel (x, y) to the input location
/// (a x + b y + tx, c x + d y + ty) it is sampled from.
struct AffineTransform {
  double a = 1, b = 0, tx = 0;
  double c = 0, d = 1, ty = 0;

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double x, double y) { return {1, 0, x, 0, 1, y}; }
  /// Rotation by `radians` about (cx, cy).
  static AffineTransform rotation(double radians, double cx, double cy) {
    const double cs = std::cos(radians), sn = std::sin(radians);
    return {cs, -sn, cx - cs * cx + sn * cy, sn, cs, cy - sn * cx - cs * cy};
  }

  double det() const { return a * d - b * c; }
  bool invertible() const { return std::abs(det()) > 1e-6; }

  AffineTransform inverse() const {
    if (!invertible()) throw InputError("affine transform is singular");
    const double k = 1.0 / det();
    const double ia = d * k, ib = -b * k, ic = -c * k, id = a * k;
    return {ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)};
  }

  /// (this ∘ other): apply `other` first, then `this`, to output coordinates.
  AffineTransform then(const AffineTransform& o) const {
    return {o.a * a + o.b * c, o.a * b + o.b * d, o.a * tx + o.b * ty + o.tx,
            o.c * a + o.d * c, o.c * b + o.d * d, o.c * tx + o.d * ty + o.ty};
  }

  std::array<double, 6> params() const { return {a, b, tx, c, d, ty}; }
};

namespace detail {
inline double sample_bilinear(const Image& img, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  const double ax = x - fx, ay = y - fy;
  const long w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
  auto px = [&](long yy, long xx) {
    return (xx < 0 || yy < 0 || xx >= w || yy >= h)
               ? 0.0
               : img.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
  };
  const double top = ax == 0.0 ? px(y0, x0) : (1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1);
  if (ay == 0.0) return top;
  const double bot = ax == 0.0 ? px(y0 + 1, x0) : (1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1);
  return (1 - ay) * top + ay * bot;
}
}  // namespace detail

/// Bilinear resampling; samples falling outside the source read as 0.
inline Image warp_affine(const Image& img, const AffineTransform& t) {
  if (!t.invertible()) throw InputError("warp_affine: singular transform");
  Image out(img.height(), img.width());
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double xd = static_cast<double>(x), yd = static_cast<double>(y);
      out.at(y, x) = detail::sample_bilinear(img, t.a * xd + t.b * yd + t.tx, t.c * xd + t.d * yd + t.ty);
    }
  return out;
}

struct RegistrationConfig {
  std::size_t levels = 3;            // pyramid levels, factor 2
  std::size_t max_iterations = 200;  // per level
  double tolerance = 1e-5;           // stop when the parameter step falls below this
  double fd_step = 1e-3;             // finite-difference step, scaled parameter units
  double margin_fraction = 0.125;    // border excluded from the objective
};

struct RegistrationResult {
  AffineTransform transform;  // warp_affine(moving, transform) ~ fixed
  double mse = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

inline Image downsample2(const Image& img) {
  Image out(img.height() / 2, img.width() / 2);
  for (std::size_t y = 0; y < out.height(); ++y)
    for (std::size_t x = 0; x < out.width(); ++x)
      out.at(y, x) = 0.25 * (img.at(2 * y, 2 * x) + img.at(2 * y, 2 * x + 1) +
                             img.at(2 * y + 1, 2 * x) + img.at(2 * y + 1, 2 * x + 1));
  return out;
}

inline double variance(const Image& img) {
  double m = 0.0;
  for (double v : img.pixels()) m += v;
  m /= static_cast<double>(img.size());
  double s = 0.0;
  for (double v : img.pixels()) s += (v - m) * (v - m);
  return s / static_cast<double>(img.size());
}

/// Optimisation state at one pyramid level. Coordinates are centred on the
/// image; the linear part is stored as (A - I) * scale so that one unit
/// moves the image border by about one pixel, matching the translation units.
class LevelObjective {
 public:
  LevelObjective(const Image& moving, const Image& fixed, double margin_fraction)
      : moving_(moving), fixed_(fixed) {
    cx_ = (static_cast<double>(fixed.width()) - 1.0) / 2.0;
    cy_ = (static_cast<double>(fixed.height()) - 1.0) / 2.0;
    scale_ = std::max(1.0, std::max(cx_, cy_));
    my_ = static_cast<std::size_t>(std::floor(margin_fraction * static_cast<double>(fixed.height())));
    mx_ = static_cast<std::size_t>(std::floor(margin_fraction * static_cast<double>(fixed.width())));
    if (2 * my_ >= fixed.height()) my_ = 0;
    if (2 * mx_ >= fixed.width()) mx_ = 0;
  }

  /// Scaled parameters -> absolute transform.
  AffineTransform to_transform(const std::array<double, 6>& q) const {
    const double a = 1.0 + q[0] / scale_, b = q[1] / scale_;
    const double c = q[3] / scale_, d = 1.0 + q[4] / scale_;
    // x_in = A (x - c) + c + t
    return {a, b, cx_ - a * cx_ - b * cy_ + q[2], c, d, cy_ - c * cx_ - d * cy_ + q[5]};
  }

  std::array<double, 6> from_centered(const std::array<double, 4>& lin, double tx, double ty) const {
    return {(lin[0] - 1.0) * scale_, lin[1] * scale_, tx, lin[2] * scale_, (lin[3] - 1.0) * scale_, ty};
  }

  double operator()(const std::array<double, 6>& q) const {
    const AffineTransform t = to_transform(q);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t y = my_; y + my_ < fixed_.height(); ++y)
      for (std::size_t x = mx_; x + mx_ < fixed_.width(); ++x) {
        const double xd = static_cast<double>(x), yd = static_cast<double>(y);
        const double v = sample_bilinear(moving_, t.a * xd + t.b * yd + t.tx, t.c * xd + t.d * yd + t.ty);
        const double diff = v - fixed_.at(y, x);
        sum += diff * diff;
        ++n;
      }
    return sum / static_cast<double>(n);
  }

  double scale() const { return scale_; }

 private:
  const Image& moving_;
  const Image& fixed_;
  double cx_ = 0, cy_ = 0, scale_ = 1;
  std::size_t my_ = 0, mx_ = 0;
};

}  // namespace detail

/// Affine registration minimising the mean squared intensity difference.
/// Coarse-to-fine over a factor-2 pyramid; at each level, gradient descent
/// with central-difference gradients, Barzilai-Borwein step lengths and
/// Armijo backtracking.
inline RegistrationResult register_affine(const Image& moving, const Image& fixed,
                                          const RegistrationConfig& cfg = {}) {
  require_same_dims(moving, fixed, "register_affine");
  if (fixed.height() < 4 || fixed.width() < 4) throw InputError("register_affine: image too small");
  if (detail::variance(moving) == 0.0 || detail::variance(fixed) == 0.0) {
    throw DegenerateError("register_affine: constant image has no gradient to follow");
  }

  std::vector<Image> mov{moving}, fix{fixed};
  for (std::size_t l = 1; l < std::max<std::size_t>(1, cfg.levels); ++l) {
    if (fix.back().height() < 32 || fix.back().width() < 32) break;
    mov.push_back(detail::downsample2(mov.back()));
    fix.push_back(detail::downsample2(fix.back()));
  }

  // Centred representation carried between levels: linear part + translation.
  std::array<double, 4> lin{1, 0, 0, 1};
  double tx = 0, ty = 0;
  RegistrationResult res;

  for (std::size_t l = fix.size(); l-- > 0;) {
    detail::LevelObjective f(mov[l], fix[l], cfg.margin_fraction);
    std::array<double, 6> q = f.from_centered(lin, tx, ty);
    double fq = f(q);
    double alpha = 0.0;
    std::array<double, 6> prev_q{}, prev_g{};
    bool have_prev = false;
    for (std::size_t it = 0; it < cfg.max_iterations && fq > 0.0; ++it) {
      ++res.iterations;
      std::array<double, 6> g{};
      for (std::size_t i = 0; i < 6; ++i) {
        auto qp = q, qm = q;
        qp[i] += cfg.fd_step;
        qm[i] -= cfg.fd_step;
        g[i] = (f(qp) - f(qm)) / (2.0 * cfg.fd_step);
      }
      double gg = 0.0, gmax = 0.0;
      for (double v : g) {
        gg += v * v;
        gmax = std::max(gmax, std::abs(v));
      }
      if (gmax == 0.0) break;
      if (have_prev) {
        double sy = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
          const double s = q[i] - prev_q[i], y = g[i] - prev_g[i];
          sy += s * y;
          ss += s * s;
        }
        alpha = sy > 0.0 ? ss / sy : 2.0 * alpha;
      } else {
        alpha = 0.25 / gmax;  // first trial moves at most a quarter pixel
      }
      alpha = std::min(alpha, 2.0 / gmax);
      bool accepted = false;
      std::array<double, 6> qn{};
      double fn = fq;
      for (int bt = 0; bt < 40; ++bt) {
        for (std::size_t i = 0; i < 6; ++i) qn[i] = q[i] - alpha * g[i];
        fn = f(qn);
        if (fn <= fq - 1e-4 * alpha * gg) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
      double step = 0.0;
      for (std::size_t i = 0; i < 6; ++i) step = std::max(step, std::abs(qn[i] - q[i]));
      prev_q = q;
      prev_g = g;
      have_prev = true;
      q = qn;
      fq = fn;
      if (step < cfg.tolerance) break;
    }
    const double sc = f.scale();
    lin = {1.0 + q[0] / sc, q[1] / sc, q[3] / sc, 1.0 + q[4] / sc};
    tx = q[2];
    ty = q[5];
    if (l > 0) {
      tx *= 2.0;
      ty *= 2.0;
    } else {
      res.transform = f.to_transform(q);
      res.mse = fq;
    }
  }
  return res;
}

}  // namespace octden
