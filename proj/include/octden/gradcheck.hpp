#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "octden/tensor.hpp"

namespace octden {

/// One perturbable block of scalars, e.g. a weight tensor or an input.
struct GradVariable {
  std::string name;
  std::span<double> values;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor, relative to max(1, |loss|). Entries whose gradients
  /// sit below it are compared in absolute terms against the floor.
  double floor_scale = 1e-6;
  /// 0 checks every entry; otherwise this many entries per variable, drawn
  /// without replacement.
  std::size_t max_entries_per_variable = 0;
  std::uint64_t seed = 0;
  /// Optional elementwise weights w in loss = sum((w * out)^2).
  const Tensor<double>* probe = nullptr;
};

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::string failure;
};

/// Compares analytic gradients of loss = sum(out^2) against central finite
/// differences. `forward` must read the current contents of the variables;
/// `backward` receives dL/d(out) and returns one gradient vector per
/// variable, in order.
inline GradCheckReport grad_check(
    const std::vector<GradVariable>& vars, const std::function<Tensor<double>()>& forward,
    const std::function<std::vector<std::vector<double>>(const Tensor<double>&)>& backward,
    const GradCheckOptions& opts = {}) {
  auto loss_of = [&](const Tensor<double>& out) {
    double l = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double v = opts.probe ? (*opts.probe)[i] * out[i] : out[i];
      l += v * v;
    }
    return l;
  };

  GradCheckReport rep;
  const Tensor<double> out0 = forward();
  const double loss0 = loss_of(out0);
  Tensor<double> gout(out0.shape());
  for (std::size_t i = 0; i < out0.size(); ++i) {
    const double w = opts.probe ? (*opts.probe)[i] : 1.0;
    gout[i] = 2.0 * w * w * out0[i];
  }
  const auto analytic = backward(gout);
  if (analytic.size() != vars.size()) {
    rep.failure = "backward returned " + std::to_string(analytic.size()) + " gradients for " +
                  std::to_string(vars.size()) + " variables";
    return rep;
  }
  const double floor = opts.floor_scale * std::max(1.0, std::abs(loss0));
  std::mt19937_64 rng(opts.seed);

  for (std::size_t v = 0; v < vars.size(); ++v) {
    auto values = vars[v].values;
    if (analytic[v].size() != values.size()) {
      rep.failure = vars[v].name + ": gradient length mismatch";
      return rep;
    }
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opts.max_entries_per_variable && idx.size() > opts.max_entries_per_variable) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opts.max_entries_per_variable);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double saved = values[i];
      values[i] = saved + opts.step;
      const double lp = loss_of(forward());
      values[i] = saved - opts.step;
      const double lm = loss_of(forward());
      values[i] = saved;
      const double numeric = (lp - lm) / (2.0 * opts.step);
      const double a = analytic[v][i];
      const std::string where = vars[v].name + "[" + std::to_string(i) + "]";
      if (!std::isfinite(a) || !std::isfinite(numeric)) {
        rep.failure = "non-finite gradient at " + where;
        rep.passed = false;
        return rep;
      }
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++rep.checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = where + " analytic=" + std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  rep.passed = rep.max_rel_error <= opts.tolerance;
  return rep;
}

}  // namespace octden
