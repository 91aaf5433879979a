#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "octden/binary_io.hpp"
#include "octden/error.hpp"
#include "octden/tensor.hpp"

namespace octden {

/// Grayscale image, row-major, intensities nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0)
      : h_(height), w_(width), px_(height * width, fill) {}
  Image(std::size_t height, std::size_t width, std::vector<double> pixels)
      : h_(height), w_(width), px_(std::move(pixels)) {
    if (px_.size() != h_ * w_) throw ShapeError("image pixel count does not match dims");
  }

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t size() const { return px_.size(); }
  bool empty() const { return px_.empty(); }

  double& operator[](std::size_t i) { return px_[i]; }
  double operator[](std::size_t i) const { return px_[i]; }
  double& at(std::size_t y, std::size_t x) { return px_[y * w_ + x]; }
  double at(std::size_t y, std::size_t x) const { return px_[y * w_ + x]; }

  std::span<double> pixels() { return px_; }
  std::span<const double> pixels() const { return px_; }

  bool same_dims(const Image& o) const { return h_ == o.h_ && w_ == o.w_; }
  bool operator==(const Image&) const = default;

 private:
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<double> px_;
};

/// Ordered stack of equally sized B-scans.
struct Volume {
  std::vector<Image> slices;

  std::size_t size() const { return slices.size(); }
  const Image& operator[](std::size_t i) const { return slices[i]; }

  void validate() const {
    if (slices.empty()) throw InputError("volume has no slices");
    for (const auto& s : slices)
      if (!s.same_dims(slices.front())) throw ShapeError("volume slices differ in size");
  }
};

inline void require_same_dims(const Image& a, const Image& b, const char* op) {
  if (!a.same_dims(b)) {
    throw ShapeError(std::string(op) + ": image dims differ (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + ")");
  }
}

inline Image clamp01(Image img) {
  for (auto& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

/// Window [y0, y0+h) x [x0, x0+w).
struct CropWindow {
  std::size_t y0 = 0, x0 = 0, height = 0, width = 0;
};

inline Image crop_image(const Image& img, const CropWindow& c) {
  if (c.height == 0 || c.width == 0 || c.y0 + c.height > img.height() ||
      c.x0 + c.width > img.width()) {
    throw InputError("crop window outside image");
  }
  Image out(c.height, c.width);
  for (std::size_t y = 0; y < c.height; ++y)
    for (std::size_t x = 0; x < c.width; ++x) out.at(y, x) = img.at(c.y0 + y, c.x0 + x);
  return out;
}

template <typename T>
Tensor<T> to_tensor(const Image& img) {
  Tensor<T> t(Shape{1, 1, img.height(), img.width()});
  std::transform(img.pixels().begin(), img.pixels().end(), t.data().begin(),
                 [](double p) { return static_cast<T>(p); });
  return t;
}

/// Stacks equally sized images into an (n, 1, h, w) batch.
template <typename T>
Tensor<T> to_batch(std::span<const Image* const> imgs) {
  if (imgs.empty()) throw InputError("to_batch: no images");
  const std::size_t h = imgs[0]->height(), w = imgs[0]->width();
  Tensor<T> t(Shape{imgs.size(), 1, h, w});
  for (std::size_t b = 0; b < imgs.size(); ++b) {
    require_same_dims(*imgs[0], *imgs[b], "to_batch");
    auto dst = t.plane(b, 0);
    auto src = imgs[b]->pixels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
  }
  return t;
}

template <typename T>
Image image_from_tensor(const Tensor<T>& t, std::size_t b = 0, std::size_t ch = 0) {
  auto src = t.plane(b, ch);
  std::vector<double> px(src.begin(), src.end());
  return Image(t.shape().h, t.shape().w, std::move(px));
}

// ---------------------------------------------------------------------------
// File formats: binary PGM (P5, maxval <= 65535) and TNS1 (1x1xhxw).

inline constexpr std::size_t kMaxImagePixels = std::size_t{1} << 28;

namespace detail {

class PgmHeaderParser {
 public:
  PgmHeaderParser(std::span<const char> d, std::string what) : d_(d), what_(std::move(what)) {}

  std::size_t number() {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < d_.size() && d_[pos_] >= '0' && d_[pos_] <= '9') ++pos_;
    if (start == pos_) {
      if (pos_ >= d_.size()) throw TruncatedError(what_ + ": header ends early");
      throw MalformedHeaderError(what_ + ": expected a decimal number in PGM header");
    }
    if (pos_ - start > 12) throw DimensionOverflowError(what_ + ": header number too large");
    std::size_t v = 0;
    std::from_chars(d_.data() + start, d_.data() + pos_, v);
    return v;
  }

  void single_whitespace() {
    if (pos_ >= d_.size()) throw TruncatedError(what_ + ": header ends early");
    if (!is_space(d_[pos_])) throw MalformedHeaderError(what_ + ": missing whitespace after maxval");
    ++pos_;
  }

  std::size_t position() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }
  void skip_space_and_comments() {
    while (pos_ < d_.size()) {
      if (is_space(d_[pos_])) {
        ++pos_;
      } else if (d_[pos_] == '#') {
        while (pos_ < d_.size() && d_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  std::span<const char> d_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Image decode_pgm(std::span<const char> data, const std::string& what = "PGM") {
  if (data.size() < 2) throw TruncatedError(what + ": file too short");
  if (data[0] != 'P') throw UnsupportedFormatError(what + ": not a PGM or TNS1 file");
  if (data[1] != '5') {
    throw UnsupportedFormatError(what + ": only binary PGM (P5) is supported, got P" +
                                 std::string(1, data[1]));
  }
  detail::PgmHeaderParser p(data, what);
  p.seek(2);
  const std::size_t width = p.number();
  const std::size_t height = p.number();
  const std::size_t maxval = p.number();
  p.single_whitespace();
  if (width == 0 || height == 0) throw MalformedHeaderError(what + ": zero image dimension");
  if (maxval == 0 || maxval > 65535) throw MalformedHeaderError(what + ": maxval out of range");
  if (width > kMaxImagePixels / height) {
    throw DimensionOverflowError(what + ": " + std::to_string(width) + "x" +
                                 std::to_string(height) + " exceeds the pixel limit");
  }
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const std::size_t n = width * height;
  const std::size_t off = p.position();
  if (data.size() - off < n * bpp) throw TruncatedError(what + ": pixel data truncated");
  Image img(height, width);
  const auto* u = reinterpret_cast<const unsigned char*>(data.data() + off);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t v = bpp == 1 ? u[i] : (std::size_t{u[2 * i]} << 8) | u[2 * i + 1];
    img[i] = std::min(1.0, static_cast<double>(v) * scale);
  }
  return img;
}

/// maxval 255 writes 8-bit samples, anything larger 16-bit big-endian.
inline std::vector<char> encode_pgm(const Image& img, unsigned maxval = 65535) {
  if (maxval == 0 || maxval > 65535) throw InputError("PGM maxval must be in [1, 65535]");
  std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                       "\n" + std::to_string(maxval) + "\n";
  std::vector<char> out(header.begin(), header.end());
  const bool wide = maxval > 255;
  out.reserve(out.size() + img.size() * (wide ? 2 : 1));
  for (double v : img.pixels()) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    const auto q = static_cast<unsigned>(std::lround(c * maxval));
    if (wide) out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

inline Image decode_tns_image(std::span<const char> data, const std::string& what) {
  const Tensor<double> t = decode_tensor<double>(data, what);
  if (t.shape().n != 1 || t.shape().c != 1) {
    throw UnsupportedFormatError(what + ": TNS1 image must have shape (1,1,h,w), got " +
                                 t.shape().str());
  }
  Image img = image_from_tensor(t);
  for (double v : img.pixels())
    if (!std::isfinite(v)) throw FormatError(what + ": non-finite intensity");
  return clamp01(std::move(img));
}

/// Reads a P5 PGM or TNS1 file, picking the decoder from the magic bytes.
inline Image read_image(const std::filesystem::path& path) {
  const auto data = detail::read_file(path);
  if (data.size() >= 4 && std::string_view(data.data(), 4) == kTensorMagic) {
    return decode_tns_image(data, path.string());
  }
  return decode_pgm(data, path.string());
}

enum class ImageFormat { Pgm8, Pgm16, Tns };

inline ImageFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".tns" ? ImageFormat::Tns : ImageFormat::Pgm16;
}

inline void write_image(const Image& img, const std::filesystem::path& path,
                        ImageFormat fmt) {
  switch (fmt) {
    case ImageFormat::Pgm8: detail::write_file_atomic(path, encode_pgm(img, 255)); break;
    case ImageFormat::Pgm16: detail::write_file_atomic(path, encode_pgm(img, 65535)); break;
    case ImageFormat::Tns: write_tensor(to_tensor<double>(img), path); break;
  }
}

/// Format chosen from the extension: ".tns" is TNS1, anything else 16-bit PGM.
inline void write_image(const Image& img, const std::filesystem::path& path) {
  write_image(img, path, format_for(path));
}

/// Files in `dir` whose stem is all digits, in numeric order.
inline std::vector<std::filesystem::path> numbered_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::pair<unsigned long long, fs::path>> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string stem = e.path().stem().string();
    if (stem.empty() || stem.size() > 18 ||
        !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      continue;
    }
    found.emplace_back(std::stoull(stem), e.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

/// A volume is a directory of numerically named slice files (000.pgm, 001.pgm, ...).
inline Volume read_volume(const std::filesystem::path& dir) {
  Volume v;
  for (const auto& f : numbered_files(dir)) v.slices.push_back(read_image(f));
  if (v.slices.empty()) throw InputError("no numbered slices in " + dir.string());
  v.validate();
  return v;
}

inline std::string slice_name(std::size_t index, std::size_t count, const std::string& ext) {
  std::size_t digits = 3;
  for (std::size_t c = count; c >= 1000; c /= 10) ++digits;
  std::string s = std::to_string(index);
  return std::string(digits > s.size() ? digits - s.size() : 0, '0') + s + ext;
}

inline void write_volume(const Volume& v, const std::filesystem::path& dir,
                         const std::string& ext = ".pgm") {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < v.size(); ++i) write_image(v[i], dir / slice_name(i, v.size(), ext));
}

}  // namespace octden
