#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "octden/checkpoint.hpp"
#include "octden/error.hpp"
#include "octden/image.hpp"
#include "octden/model.hpp"
#include "octden/tensor.hpp"

namespace octden {

struct TrainConfig {
  std::size_t patch_size = 128;
  std::size_t patch_stride = 64;
  double variance_floor = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool augment_hflip = true;
  double validation_fraction = 0.1;
  std::size_t early_stop_patience = 10;
  std::uint64_t rng_seed = 0;
  std::size_t width = 64;  // hidden channel count

  void validate() const {
    if (patch_size < 3) throw InputError("patch_size must be >= 3");
    if (patch_stride == 0) throw InputError("patch_stride must be >= 1");
    if (batch_size == 0) throw InputError("batch_size must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw InputError("validation_fraction must be in (0, 1)");
    }
    if (!(learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
      throw InputError("optimizer betas must be in [0, 1) and eps > 0");
    }
  }
};

/// Noisy/clean training pair; the regression target is noisy - clean.
struct PatchPair {
  Image noisy;
  Image clean;

  Image noise() const {
    Image n(noisy.height(), noisy.width());
    for (std::size_t i = 0; i < n.size(); ++i) n[i] = noisy[i] - clean[i];
    return n;
  }
};

// ---------------------------------------------------------------------------
// Loss

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // dL/d(predicted)
};

/// Mean over batch and pixels of (predicted - (noisy - clean))^2.
template <typename T>
LossResult<T> residual_mse(const Tensor<T>& predicted, const Tensor<T>& noisy,
                           const Tensor<T>& clean) {
  detail::require_same_shape(predicted.shape(), noisy.shape(), "residual_mse");
  detail::require_same_shape(predicted.shape(), clean.shape(), "residual_mse");
  const double count = static_cast<double>(predicted.size());
  LossResult<T> r{0.0, Tensor<T>(predicted.shape())};
  const T scale = static_cast<T>(2.0 / count);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const T d = predicted[i] - (noisy[i] - clean[i]);
    r.loss += static_cast<double>(d) * static_cast<double>(d);
    r.grad[i] = scale * d;
  }
  r.loss /= count;
  return r;
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct OptimizerState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected adaptive-moment update. Checks every gradient before
/// touching anything, so a non-finite gradient leaves params and state intact.
template <typename T>
void adam_step(std::span<const ParamRef<T>> params, std::span<const ParamRef<T>> grads,
               OptimizerState<T>& st, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw InputError("adam_step: params/grads count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].values.size() != params[i].values.size()) {
      throw InputError("adam_step: gradient size mismatch for " + params[i].name);
    }
    for (std::size_t j = 0; j < grads[i].values.size(); ++j)
      if (!std::isfinite(static_cast<double>(grads[i].values[j]))) {
        throw DivergenceError("non-finite gradient in " + params[i].name + "[" +
                              std::to_string(j) + "]");
      }
  }
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.values.size(), T{0});
      st.v.emplace_back(p.values.size(), T{0});
    }
  }
  ++st.t;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  const T step = static_cast<T>(cfg.learning_rate / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  const T ob1 = static_cast<T>(1.0 - b1), ob2 = static_cast<T>(1.0 - b2);
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values;
    auto g = grads[i].values;
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = tb1 * m[j] + ob1 * g[j];
      v[j] = tb2 * v[j] + ob2 * g[j] * g[j];
      p[j] -= step * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Data

/// Top-left offsets along one axis: multiples of stride plus a final flush
/// position when the grid does not reach the edge.
inline std::vector<std::size_t> patch_offsets(std::size_t extent, std::size_t patch,
                                              std::size_t stride) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p + patch <= extent; p += stride) out.push_back(p);
  if (out.back() + patch < extent) out.push_back(extent - patch);
  return out;
}

inline double patch_variance(const Image& img, std::size_t y0, std::size_t x0, std::size_t size) {
  double sum = 0.0;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) sum += img.at(y0 + y, x0 + x);
  const double mean = sum / static_cast<double>(size * size);
  double sq = 0.0;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double d = img.at(y0 + y, x0 + x) - mean;
      sq += d * d;
    }
  return sq / static_cast<double>(size * size);
}

/// Grid patches whose clean-patch variance reaches variance_floor.
inline std::vector<PatchPair> extract_patches(const Image& noisy, const Image& clean,
                                              const TrainConfig& cfg) {
  require_same_dims(noisy, clean, "extract_patches");
  const std::size_t P = cfg.patch_size;
  if (cfg.patch_stride == 0) throw InputError("patch_stride must be >= 1");
  if (noisy.height() < P || noisy.width() < P) {
    throw InputError("image " + std::to_string(noisy.height()) + "x" +
                     std::to_string(noisy.width()) + " is smaller than patch size " +
                     std::to_string(P));
  }
  std::vector<PatchPair> out;
  for (std::size_t y : patch_offsets(noisy.height(), P, cfg.patch_stride))
    for (std::size_t x : patch_offsets(noisy.width(), P, cfg.patch_stride)) {
      if (patch_variance(clean, y, x, P) < cfg.variance_floor) continue;
      const CropWindow win{y, x, P, P};
      out.push_back({crop_image(noisy, win), crop_image(clean, win)});
    }
  return out;
}

inline Image hflip(const Image& img) {
  Image out(img.height(), img.width());
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) out.at(y, x) = img.at(y, img.width() - 1 - x);
  return out;
}

inline PatchPair hflip(const PatchPair& p) { return {hflip(p.noisy), hflip(p.clean)}; }

/// Horizontal flip with probability 1/2 when enabled. Vertical flips are
/// never applied: retinal layer order is anatomical.
template <typename Rng>
PatchPair augment(const PatchPair& pair, const TrainConfig& cfg, Rng& rng) {
  if (!cfg.augment_hflip) return pair;
  std::bernoulli_distribution coin(0.5);
  return coin(rng) ? hflip(pair) : pair;
}

// ---------------------------------------------------------------------------
// Training

template <typename T>
class Trainer {
 public:
  Trainer(Network<T> net, const AdamConfig& adam) : net_(std::move(net)), adam_(adam) {}

  /// Forward (Train mode), backward and one optimizer step; returns the
  /// loss before the update.
  double step(const Tensor<T>& noisy, const Tensor<T>& clean) {
    NetworkTape<T> tape;
    const Tensor<T> pred = network_forward(noisy, net_, Mode::Train, &tape);
    auto loss = residual_mse(pred, noisy, clean);
    if (!std::isfinite(loss.loss)) throw DivergenceError("non-finite training loss");
    NetworkGrads<T> g = network_backward(tape, net_, loss.grad);
    tape = {};
    const auto params = parameters(net_);
    const auto grads = parameters(g.params);
    adam_step<T>(params, grads, state_, adam_);
    return loss.loss;
  }

  /// Infer-mode loss; no state changes.
  double evaluate(const Tensor<T>& noisy, const Tensor<T>& clean) const {
    return residual_mse(predict_noise(noisy, net_), noisy, clean).loss;
  }

  Network<T>& network() { return net_; }
  const Network<T>& network() const { return net_; }
  const OptimizerState<T>& optimizer() const { return state_; }

 private:
  Network<T> net_;
  AdamConfig adam_;
  OptimizerState<T> state_;
};

struct TrainResult {
  Checkpoint checkpoint;  // parameters from the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&, bool improved)>;

namespace detail {
template <typename T>
Tensor<T> batch_of(const std::vector<PatchPair>& data, std::span<const std::size_t> idx,
                   bool noisy) {
  std::vector<const Image*> imgs;
  for (std::size_t i : idx) imgs.push_back(noisy ? &data[i].noisy : &data[i].clean);
  return to_batch<T>(imgs);
}
}  // namespace detail

/// Mini-batch training on the residual MSE with a seeded shuffle, hold-out
/// validation and patience-based early stopping. T selects the arithmetic
/// precision; the returned checkpoint is always stored in 64-bit.
template <typename T = float>
TrainResult train_loop(const std::vector<PatchPair>& dataset, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (dataset.empty()) throw InputError("training dataset is empty");
  for (const auto& p : dataset) {
    require_same_dims(dataset.front().noisy, p.noisy, "train_loop");
    require_same_dims(p.noisy, p.clean, "train_loop");
  }

  std::mt19937_64 data_rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), data_rng);
  auto n_val = static_cast<std::size_t>(
      std::llround(cfg.validation_fraction * static_cast<double>(dataset.size())));
  n_val = std::min(n_val, dataset.size() - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
  if (train_idx.empty()) throw InputError("no training samples after the validation split");

  NetworkSpec spec;
  spec.width = cfg.width;
  Trainer<T> trainer(make_network<T>(spec, cfg.rng_seed),
                     AdamConfig{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps});

  auto val_loss = [&]() {
    const auto& idx = val_idx.empty() ? train_idx : val_idx;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < idx.size(); s += cfg.batch_size) {
      const std::span<const std::size_t> b(idx.data() + s, std::min(cfg.batch_size, idx.size() - s));
      total += trainer.evaluate(detail::batch_of<T>(dataset, b, true),
                                detail::batch_of<T>(dataset, b, false)) *
               static_cast<double>(b.size());
      count += b.size();
    }
    return total / static_cast<double>(count);
  };

  TrainResult res;
  Network<T> best = trainer.network();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), data_rng);
    double total = 0.0;
    for (std::size_t s = 0, batch = 0; s < train_idx.size(); s += cfg.batch_size, ++batch) {
      const std::size_t nb = std::min(cfg.batch_size, train_idx.size() - s);
      std::vector<PatchPair> aug;
      aug.reserve(nb);
      for (std::size_t i = 0; i < nb; ++i) aug.push_back(augment(dataset[train_idx[s + i]], cfg, data_rng));
      std::vector<std::size_t> local(nb);
      std::iota(local.begin(), local.end(), std::size_t{0});
      double loss = 0.0;
      try {
        loss = trainer.step(detail::batch_of<T>(aug, local, true), detail::batch_of<T>(aug, local, false));
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch) + ": " + e.what());
      }
      total += loss * static_cast<double>(nb);
    }
    EpochRecord rec{epoch, total / static_cast<double>(train_idx.size()), val_loss()};
    if (!std::isfinite(rec.val_loss)) {
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    res.history.push_back(rec);
    const bool improved = rec.val_loss < best_loss;
    if (improved) {
      best_loss = rec.val_loss;
      best = trainer.network();
      res.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (on_epoch) on_epoch(rec, improved);
    if (since_best >= cfg.early_stop_patience) {
      res.stopped_early = true;
      break;
    }
  }
  res.checkpoint.network = network_cast<double>(best);
  res.checkpoint.meta = TrainingMeta{res.best_epoch, cfg.rng_seed, res.history};
  return res;
}

/// "epoch,train_loss,val_loss" with full double precision.
inline void write_loss_csv(const std::vector<EpochRecord>& history,
                           const std::filesystem::path& path) {
  std::string s = "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.epoch), r.train_loss, r.val_loss);
    s += buf;
  }
  detail::write_file_atomic(path, std::span<const char>(s.data(), s.size()));
}

}  // namespace octden
