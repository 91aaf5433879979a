#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "octden/filters.hpp"
#include "octden/image.hpp"
#include "octden/metrics.hpp"

namespace octden {

struct Method {
  std::string name;
  std::function<Image(const Image&)> run;
};

struct EvalPair {
  std::string id;
  Image noisy;
  Image clean;
};

enum class RowStatus { Ok, Identical, Failed };

struct ReportRow {
  std::string image_id;
  std::string method;
  double psnr_db = std::numeric_limits<double>::quiet_NaN();
  double ssim = std::numeric_limits<double>::quiet_NaN();
  double time_s = 0.0;
  RowStatus status = RowStatus::Ok;
  std::string error;
};

struct MethodSummary {
  std::string method;
  double mean_psnr_db = std::numeric_limits<double>::quiet_NaN();  // finite rows only
  double mean_ssim = std::numeric_limits<double>::quiet_NaN();
  double mean_time_s = std::numeric_limits<double>::quiet_NaN();
  std::size_t psnr_rows = 0;
  std::size_t identical_rows = 0;
  std::size_t failed_rows = 0;
};

struct MetricsReport {
  std::vector<ReportRow> rows;
  std::vector<MethodSummary> summary;  // one per method, input order

  const MethodSummary* find(const std::string& method) const {
    for (const auto& s : summary)
      if (s.method == method) return &s;
    return nullptr;
  }
};

struct ReportOptions {
  double peak = 1.0;
  SsimConfig ssim;
  const RoiMask* roi = nullptr;
};

/// Runs every method on every noisy image, timing each call on the calling
/// thread. A throwing method marks its row failed and evaluation continues.
inline MetricsReport evaluate_report(const std::vector<EvalPair>& pairs,
                                     const std::vector<Method>& methods,
                                     const ReportOptions& opt = {}) {
  if (pairs.empty()) throw InputError("evaluate_report: no image pairs");
  MetricsReport rep;
  for (const auto& m : methods) {
    MethodSummary sum{m.name};
    double psnr_total = 0.0, ssim_total = 0.0, time_total = 0.0;
    std::size_t ok = 0;
    for (const auto& p : pairs) {
      ReportRow row{p.id, m.name};
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const Image out = m.run(p.noisy);
        row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto db = psnr(out, p.clean, opt.peak, opt.roi);
        row.ssim = ssim(out, p.clean, opt.ssim, opt.roi);
        if (db) {
          row.psnr_db = *db;
          psnr_total += *db;
          ++sum.psnr_rows;
        } else {
          row.status = RowStatus::Identical;
          row.psnr_db = std::numeric_limits<double>::infinity();
          ++sum.identical_rows;
        }
        ssim_total += row.ssim;
        time_total += row.time_s;
        ++ok;
      } catch (const std::exception& e) {
        row.status = RowStatus::Failed;
        row.error = e.what();
        ++sum.failed_rows;
      }
      rep.rows.push_back(std::move(row));
    }
    if (sum.psnr_rows) sum.mean_psnr_db = psnr_total / static_cast<double>(sum.psnr_rows);
    if (ok) {
      sum.mean_ssim = ssim_total / static_cast<double>(ok);
      sum.mean_time_s = time_total / static_cast<double>(ok);
    }
    rep.summary.push_back(sum);
  }
  return rep;
}

/// Picks the parameter whose method output has the highest mean PSNR over
/// the pairs (identical outputs rank first).
template <typename Param>
Param best_parameter(const std::vector<EvalPair>& pairs, const std::vector<Param>& grid,
                     const std::function<Image(const Image&, const Param&)>& method,
                     double peak = 1.0, const RoiMask* roi = nullptr) {
  if (grid.empty()) throw InputError("best_parameter: empty grid");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (const auto& p : pairs) {
      const auto db = psnr(method(p.noisy, grid[g]), p.clean, peak, roi);
      total += db ? *db : std::numeric_limits<double>::infinity();
    }
    if (total > best_score) {
      best_score = total;
      best = g;
    }
  }
  return grid[best];
}

namespace detail {
inline std::string fmt_num(double v, const char* f) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
}  // namespace detail

/// Columns: image_id, method, psnr_db, ssim, time_s. Identical rows carry
/// psnr_db = inf; failed rows nan.
inline std::string report_csv(const MetricsReport& rep) {
  std::string s = "image_id,method,psnr_db,ssim,time_s\n";
  for (const auto& r : rep.rows) {
    s += r.image_id + "," + r.method + "," + detail::fmt_num(r.psnr_db, "%.6f") + "," +
         detail::fmt_num(r.ssim, "%.6f") + "," + detail::fmt_num(r.time_s, "%.6f") + "\n";
  }
  return s;
}

/// Aligned plain-text summary: one line per method with mean PSNR, SSIM and time.
inline std::string report_table(const MetricsReport& rep) {
  std::size_t wname = 9;
  for (const auto& s : rep.summary) wname = std::max(wname, s.method.size());
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-*s  %10s  %8s  %12s\n", static_cast<int>(wname), "Algorithm",
                "PSNR(dB)", "SSIM", "Avg time(s)");
  out += buf;
  out += std::string(wname + 38, '-') + "\n";
  for (const auto& s : rep.summary) {
    std::snprintf(buf, sizeof buf, "%-*s  %10s  %8s  %12s\n", static_cast<int>(wname),
                  s.method.c_str(), detail::fmt_num(s.mean_psnr_db, "%.2f").c_str(),
                  detail::fmt_num(s.mean_ssim, "%.4f").c_str(),
                  detail::fmt_num(s.mean_time_s, "%.4f").c_str());
    out += buf;
  }
  return out;
}

}  // namespace octden
