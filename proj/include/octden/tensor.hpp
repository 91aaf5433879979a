#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <mutex>
#include <new>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "octden/binary_io.hpp"
#include "octden/error.hpp"

namespace octden {

/// Extents of an NCHW tensor.
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

namespace detail {

/// Process-wide cache of large buffers keyed by byte size. Training
/// allocates and frees the same handful of feature-map sizes every step;
/// recycling them avoids fresh page mappings and the faults that follow.
class BufferPool {
 public:
  static constexpr std::size_t kMinBytes = std::size_t{1} << 20;
  static constexpr std::size_t kMaxCachedBytes = std::size_t{1} << 30;

  static BufferPool& instance() {
    static BufferPool pool;
    return pool;
  }

  void* allocate(std::size_t bytes) {
    if (bytes >= kMinBytes) {
      std::lock_guard lock(mu_);
      auto it = free_.find(bytes);
      if (it != free_.end() && !it->second.empty()) {
        void* p = it->second.back();
        it->second.pop_back();
        cached_ -= bytes;
        return p;
      }
    }
    return ::operator new(bytes, std::align_val_t{64});
  }

  void deallocate(void* p, std::size_t bytes) {
    if (bytes >= kMinBytes) {
      std::lock_guard lock(mu_);
      if (cached_ + bytes <= kMaxCachedBytes) {
        free_[bytes].push_back(p);
        cached_ += bytes;
        return;
      }
    }
    ::operator delete(p, std::align_val_t{64});
  }

  /// Returns every cached buffer to the system.
  void release() {
    std::lock_guard lock(mu_);
    for (auto& [bytes, list] : free_)
      for (void* p : list) ::operator delete(p, std::align_val_t{64});
    free_.clear();
    cached_ = 0;
  }

  ~BufferPool() { release(); }

 private:
  BufferPool() = default;
  std::mutex mu_;
  std::unordered_map<std::size_t, std::vector<void*>> free_;
  std::size_t cached_ = 0;
};

template <typename T>
struct PoolAllocator {
  using value_type = T;
  PoolAllocator() = default;
  template <typename U>
  PoolAllocator(const PoolAllocator<U>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(BufferPool::instance().allocate(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) { BufferPool::instance().deallocate(p, n * sizeof(T)); }
  template <typename U>
  bool operator==(const PoolAllocator<U>&) const {
    return true;
  }
};

}  // namespace detail

/// Dense row-major NCHW array. Element (b, ch, y, x) lives at
/// ((b * c + ch) * h + y) * w + x.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{}) : shape_(checked(shape)), data_(shape.size(), fill) {}

  Tensor(Shape shape, const std::vector<T>& data)
      : shape_(checked(shape)), data_(data.begin(), data.end()) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const {
    return ((b * shape_.c + ch) * shape_.h + y) * shape_.w + x;
  }
  T& operator()(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) {
    return data_[offset(b, ch, y, x)];
  }
  const T& operator()(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const {
    return data_[offset(b, ch, y, x)];
  }

  /// One (h, w) plane.
  std::span<T> plane(std::size_t b, std::size_t ch) {
    return std::span<T>(data_).subspan(offset(b, ch, 0, 0), shape_.plane());
  }
  std::span<const T> plane(std::size_t b, std::size_t ch) const {
    return std::span<const T>(data_).subspan(offset(b, ch, 0, 0), shape_.plane());
  }
  /// All channels of batch item b.
  std::span<T> item(std::size_t b) {
    return std::span<T>(data_).subspan(b * shape_.c * shape_.plane(), shape_.c * shape_.plane());
  }
  std::span<const T> item(std::size_t b) const {
    return std::span<const T>(data_).subspan(b * shape_.c * shape_.plane(),
                                             shape_.c * shape_.plane());
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor&) const = default;

 private:
  static Shape checked(Shape s) {
    if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
      throw ShapeError("tensor extents must be >= 1, got " + s.str());
    }
    return s;
  }

  Shape shape_{0, 0, 0, 0};
  std::vector<T, detail::PoolAllocator<T>> data_;
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.shape());
}

template <typename U, typename T>
Tensor<U> tensor_cast(const Tensor<T>& t) {
  Tensor<U> out(t.shape());
  std::transform(t.data().begin(), t.data().end(), out.data().begin(),
                 [](T v) { return static_cast<U>(v); });
  return out;
}

namespace detail {
// Reductions accumulate in double through Eigen's vectorized (and
// deterministically ordered) kernels.
template <typename T>
double sum(std::span<const T> v) {
  return Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(v.data(), static_cast<Eigen::Index>(v.size()))
      .template cast<double>()
      .sum();
}
template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  using A = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
  const auto n = static_cast<Eigen::Index>(a.size());
  return (A(a.data(), n).template cast<double>() * A(b.data(), n).template cast<double>()).sum();
}
template <typename T>
double sum_sq_dev(std::span<const T> v, double mean) {
  return (Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(v.data(), static_cast<Eigen::Index>(v.size()))
              .template cast<double>() -
          mean)
      .square()
      .sum();
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}
}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

/// In place: a += b.
template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
Tensor<T> pad_zero(const Tensor<T>& t, std::size_t p) {
  if (p == 0) return t;
  const Shape s = t.shape();
  Tensor<T> out(Shape{s.n, s.c, s.h + 2 * p, s.w + 2 * p});
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t ch = 0; ch < s.c; ++ch)
      for (std::size_t y = 0; y < s.h; ++y) {
        auto src = t.plane(b, ch).subspan(y * s.w, s.w);
        std::copy(src.begin(), src.end(), &out(b, ch, y + p, p));
      }
  return out;
}

/// Removes a border ring of width p; inverse of pad_zero.
template <typename T>
Tensor<T> crop(const Tensor<T>& t, std::size_t p) {
  if (p == 0) return t;
  const Shape s = t.shape();
  if (s.h <= 2 * p || s.w <= 2 * p) {
    throw ShapeError("crop: border " + std::to_string(p) + " too large for " + s.str());
  }
  Tensor<T> out(Shape{s.n, s.c, s.h - 2 * p, s.w - 2 * p});
  const Shape o = out.shape();
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t ch = 0; ch < s.c; ++ch)
      for (std::size_t y = 0; y < o.h; ++y) {
        const T* src = &t(b, ch, y + p, p);
        std::copy(src, src + o.w, &out(b, ch, y, 0));
      }
  return out;
}

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> variance;  // population variance
};

/// Per-channel mean and population variance over (batch, y, x). Two-pass.
template <typename T>
ChannelStats channel_stats(const Tensor<T>& t) {
  if (t.empty()) throw ShapeError("channel_stats: empty tensor");
  const Shape s = t.shape();
  const double count = static_cast<double>(s.n * s.plane());
  ChannelStats st{std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 0.0)};
  for (std::size_t ch = 0; ch < s.c; ++ch) {
    double sum = 0.0;
    for (std::size_t b = 0; b < s.n; ++b) sum += detail::sum(t.plane(b, ch));
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t b = 0; b < s.n; ++b) sq += detail::sum_sq_dev(t.plane(b, ch), mean);
    st.mean[ch] = mean;
    st.variance[ch] = sq / count;
  }
  return st;
}

// ---------------------------------------------------------------------------
// TNS1 raw tensor files: "TNS1", four u64 LE extents (n, c, h, w), then
// n*c*h*w f64 LE values.

inline constexpr std::string_view kTensorMagic = "TNS1";

template <typename T>
std::vector<char> encode_tensor(const Tensor<T>& t) {
  detail::ByteWriter w;
  w.bytes(kTensorMagic);
  const Shape s = t.shape();
  for (std::size_t e : {s.n, s.c, s.h, s.w}) w.u64(e);
  for (T v : t.data()) w.f64(static_cast<double>(v));
  return std::move(w.buffer());
}

template <typename T = double>
Tensor<T> decode_tensor(std::span<const char> bytes, const std::string& what = "TNS1") {
  detail::ByteReader r(bytes, what);
  if (bytes.size() < kTensorMagic.size() ||
      std::string_view(bytes.data(), kTensorMagic.size()) != kTensorMagic) {
    throw BadMagicError(what + ": not a TNS1 tensor file");
  }
  r.bytes(kTensorMagic.size());
  std::uint64_t ext[4];
  for (auto& e : ext) e = r.u64();
  std::uint64_t count = 1;
  for (auto e : ext) {
    if (e == 0) throw MalformedHeaderError(what + ": zero extent");
    if (count > std::numeric_limits<std::uint64_t>::max() / 8 / e) {
      throw DimensionOverflowError(what + ": extents overflow");
    }
    count *= e;
  }
  if (count > r.remaining() / sizeof(double)) {
    r.need(count * sizeof(double));
  }
  std::vector<double> vals(count);
  r.f64s(vals);
  if (r.remaining() != 0) throw MalformedHeaderError(what + ": trailing bytes after tensor data");
  Shape s{ext[0], ext[1], ext[2], ext[3]};
  if constexpr (std::is_same_v<T, double>) {
    return Tensor<double>(s, vals);
  } else {
    return tensor_cast<T>(Tensor<double>(s, vals));
  }
}

template <typename T>
void write_tensor(const Tensor<T>& t, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_tensor(t));
}

template <typename T = double>
Tensor<T> read_tensor(const std::filesystem::path& path) {
  return decode_tensor<T>(detail::read_file(path), path.string());
}

}  // namespace octden
