#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "octden/error.hpp"
#include "octden/image.hpp"
#include "octden/metrics.hpp"
#include "octden/parallel.hpp"
#include "octden/registration.hpp"

namespace octden {

struct GroundTruthConfig {
  std::size_t volumes = 20;  // M
  std::size_t nearby = 7;    // N nearby B-scans taken from each other volume
  std::size_t selected = 10; // L best candidates averaged with the target
  std::optional<CropWindow> crop;
  RegistrationConfig registration;
  SsimConfig ssim;

  void validate() const {
    if (volumes < 2) throw InputError("ground truth needs M >= 2 volumes");
    if (nearby < 1) throw InputError("ground truth needs N >= 1");
    if (selected > nearby * (volumes - 1)) {
      throw InputError("L = " + std::to_string(selected) + " exceeds N*(M-1) = " +
                       std::to_string(nearby * (volumes - 1)));
    }
  }
};

struct GroundTruthPair {
  Image noisy;
  Image clean;
};

/// A registered candidate and its similarity to the target.
struct Candidate {
  std::size_t volume = 0;
  std::size_t scan = 0;
  double ssim = 0.0;
};

/// The `count` scan indices nearest to `center`, as a contiguous window
/// shifted inward at the volume edges.
inline std::vector<std::size_t> nearby_scans(std::size_t center, std::size_t count,
                                             std::size_t scans) {
  count = std::min(count, scans);
  const std::size_t half = (count - 1) / 2;
  std::size_t start = center > half ? center - half : 0;
  start = std::min(start, scans - count);
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = start + i;
  return out;
}

/// Indices of the L highest-SSIM candidates; ties go to the lower volume,
/// then the lower scan index.
inline std::vector<std::size_t> select_top(const std::vector<Candidate>& cands, std::size_t L) {
  std::vector<std::size_t> idx(cands.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = cands[a];
    const auto& y = cands[b];
    return std::make_tuple(-x.ssim, x.volume, x.scan) < std::make_tuple(-y.ssim, y.volume, y.scan);
  });
  idx.resize(std::min(L, idx.size()));
  return idx;
}

/// Registration-and-averaging ground truth for the scan `scan` of the target
/// volume: register the N nearby scans of every other volume onto it, keep
/// the L most similar by SSIM and average them with the target itself.
inline GroundTruthPair ground_truth_for_scan(const std::vector<Volume>& vols, std::size_t target,
                                             std::size_t scan, const GroundTruthConfig& cfg) {
  auto prep = [&](const Image& img) { return cfg.crop ? crop_image(img, *cfg.crop) : img; };
  const Image fixed = prep(vols[target][scan]);

  struct Job {
    std::size_t volume, scan;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < vols.size(); ++v) {
    if (v == target) continue;
    for (std::size_t s : nearby_scans(scan, cfg.nearby, vols[v].size())) jobs.push_back({v, s});
  }
  std::vector<Image> registered(jobs.size());
  std::vector<Candidate> cands(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Image moving = prep(vols[jobs[j].volume][jobs[j].scan]);
    const RegistrationResult r = register_affine(moving, fixed, cfg.registration);
    registered[j] = warp_affine(moving, r.transform);
    cands[j] = {jobs[j].volume, jobs[j].scan, ssim(registered[j], fixed, cfg.ssim)};
  });

  const auto chosen = select_top(cands, cfg.selected);
  // Mean written as target + mean deviation, so identical inputs reproduce
  // the target bit for bit.
  Image clean(fixed.height(), fixed.width());
  const double inv = 1.0 / static_cast<double>(chosen.size() + 1);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    double dev = 0.0;
    for (std::size_t c : chosen) dev += registered[c][i] - fixed[i];
    clean[i] = std::clamp(fixed[i] + dev * inv, 0.0, 1.0);
  }
  return {fixed, std::move(clean)};
}

/// Noisy/clean pairs for every scan of volume `target`, in scan order.
/// Only the first M volumes are used.
inline std::vector<GroundTruthPair> build_ground_truth(const std::vector<Volume>& volumes,
                                                       std::size_t target,
                                                       const GroundTruthConfig& cfg) {
  cfg.validate();
  if (volumes.size() < cfg.volumes) {
    throw InputError("ground truth needs " + std::to_string(cfg.volumes) + " volumes, got " +
                     std::to_string(volumes.size()));
  }
  const std::vector<Volume> vols(volumes.begin(), volumes.begin() + static_cast<long>(cfg.volumes));
  if (target >= vols.size()) throw InputError("target volume index out of range");
  for (const auto& v : vols) {
    v.validate();
    if (!v[0].same_dims(vols[0][0]) || v.size() != vols[0].size()) {
      throw InputError("volumes must share slice geometry and scan count");
    }
  }
  if (vols[0].size() < cfg.nearby) {
    throw InputError("volumes have " + std::to_string(vols[0].size()) + " scans, fewer than N = " +
                     std::to_string(cfg.nearby));
  }
  std::vector<GroundTruthPair> out;
  out.reserve(vols[target].size());
  for (std::size_t s = 0; s < vols[target].size(); ++s)
    out.push_back(ground_truth_for_scan(vols, target, s, cfg));
  return out;
}

}  // namespace octden
