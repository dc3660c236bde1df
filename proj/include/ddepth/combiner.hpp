#pragma once

// Inverse-variance fusion and robust iterative 3-sigma selection.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ddepth/depthsolver.hpp"

namespace ddepth {

struct Gaussian {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {
/// Unnormalized weights r_i = min_var / var_i (1 for the tightest member) and their sum.
inline std::vector<double> relative_precisions(std::span<const double> variances, double* total) {
  if (variances.empty()) throw std::invalid_argument("fusion_weights: empty variance list");
  for (double v : variances)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("fusion_weights: variances must be positive and finite");
  const double vmin = *std::min_element(variances.begin(), variances.end());
  std::vector<double> r(variances.size());
  *total = 0.0;
  for (std::size_t i = 0; i < variances.size(); ++i) {
    r[i] = vmin / variances[i];
    *total += r[i];
  }
  return r;
}
}  // namespace detail

/// w_i = (1 / var_i) / sum_j (1 / var_j).
inline std::vector<double> fusion_weights(std::span<const double> variances) {
  double total = 0.0;
  auto w = detail::relative_precisions(variances, &total);
  for (double& x : w) x /= total;
  return w;
}

/// Weighted mean and sum_i w_i^2 var_i of a set of Gaussians.
inline Gaussian fuse(std::span<const double> means, std::span<const double> variances) {
  if (means.size() != variances.size())
    throw std::invalid_argument("fuse: means and variances differ in length");
  double total = 0.0;
  const auto r = detail::relative_precisions(variances, &total);
  Gaussian g;
  for (std::size_t i = 0; i < r.size(); ++i) {
    g.mean += r[i] * means[i];
    const double w = r[i] / total;
    g.variance += w * w * variances[i];
  }
  g.mean /= total;
  return g;
}

struct FusionIteration {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t added = 0;
};

struct FusionResult {
  double combined_depth = 0.0;
  double combined_variance = 0.0;
  std::vector<DepthSource> selected;
  std::vector<DepthSource> rejected;  // valid but outside the final band
  std::vector<DepthSource> invalid;
  std::size_t iterations = 0;
  std::vector<FusionIteration> trace;
};

namespace detail {
/// Valid estimates ordered by source index; throws on a valid estimate with a bad sigma.
inline std::vector<DepthEstimate> usable_sorted(std::span<const DepthEstimate> estimates,
                                                std::vector<DepthSource>* invalid = nullptr) {
  std::vector<DepthEstimate> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) {
    if (!e.valid) {
      if (invalid) invalid->push_back(e.source);
      continue;
    }
    if (!(e.sigma > 0.0) || !std::isfinite(e.sigma) || !std::isfinite(e.value))
      throw std::invalid_argument("depth estimate " + e.source.name() +
                                  " is marked valid but has a non-positive sigma");
    out.push_back(e);
  }
  const auto by_source = [](const DepthEstimate& a, const DepthEstimate& b) {
    if (a.source != b.source) return a.source < b.source;
    return a.value < b.value;
  };
  std::sort(out.begin(), out.end(), by_source);
  if (invalid) std::sort(invalid->begin(), invalid->end());
  return out;
}

/// First estimate (in source order) with the smallest variance.
inline std::size_t min_variance_index(std::span<const DepthEstimate> sorted) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].sigma < sorted[best].sigma) best = i;
  return best;
}
}  // namespace detail

/// Robust depth selection and combination.
///
/// Seeds the set with the minimum-variance estimate, then alternates between
/// fusing the set and admitting every remaining estimate strictly inside
/// (mu - 3 sigma, mu + 3 sigma). Stops on the first pass that admits nothing.
/// Invalid estimates never take part.
inline FusionResult select_and_combine(std::span<const DepthEstimate> estimates) {
  FusionResult result;
  const auto usable = detail::usable_sorted(estimates, &result.invalid);
  if (usable.empty()) throw std::invalid_argument("select_and_combine: no usable depth");

  std::vector<bool> in_set(usable.size(), false);
  in_set[detail::min_variance_index(usable)] = true;

  std::vector<double> means;
  std::vector<double> vars;
  while (true) {
    means.clear();
    vars.clear();
    for (std::size_t i = 0; i < usable.size(); ++i) {
      if (!in_set[i]) continue;
      means.push_back(usable[i].value);
      vars.push_back(usable[i].sigma * usable[i].sigma);
    }
    const Gaussian g = fuse(means, vars);
    const double sd = std::sqrt(g.variance);
    const double lo = g.mean - 3.0 * sd;
    const double hi = g.mean + 3.0 * sd;

    std::vector<std::size_t> admitted;
    for (std::size_t i = 0; i < usable.size(); ++i)
      if (!in_set[i] && usable[i].value > lo && usable[i].value < hi) admitted.push_back(i);

    ++result.iterations;
    result.trace.push_back({g.mean, g.variance, admitted.size()});
    result.combined_depth = g.mean;
    result.combined_variance = g.variance;
    if (admitted.empty()) break;
    for (std::size_t i : admitted) in_set[i] = true;
  }

  for (std::size_t i = 0; i < usable.size(); ++i)
    (in_set[i] ? result.selected : result.rejected).push_back(usable[i].source);
  return result;
}

}  // namespace ddepth
