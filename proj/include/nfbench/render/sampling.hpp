#pragma once

// Ray-depth samplers for hierarchical volume rendering: stratified uniform
// bins for the coarse pass, inverse-transform sampling from the coarse
// compositing weights for the fine pass.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "nfbench/core/rng.hpp"
#include "nfbench/core/tensor.hpp"

namespace nfbench {

struct SampleSpec {
  int coarse = 128;
  int fine = 64;
  double near = 0.0;
  double far = 1.0;

  void validate() const {
    require(near < far, "sample spec: need near < far");
    require(coarse >= 1 && fine >= 0, "sample spec: counts must be >= 1");
  }
};

// One depth drawn uniformly inside each of `coarse` equal-width bins over
// [near, far]; sorted by construction.
template <typename RngT>
std::vector<double> stratified_samples(const SampleSpec& spec, RngT& rng) {
  spec.validate();
  std::vector<double> depths(spec.coarse);
  double width = (spec.far - spec.near) / spec.coarse;
  for (int i = 0; i < spec.coarse; ++i)
    depths[i] = spec.near + (i + rng.uniform()) * width;
  return depths;
}

// Inverse-transform sampling of `count` depths from the piecewise-constant
// PDF proportional to weights[i] over bins centered on the given depths
// (interior bin edges at depth midpoints). All-zero weights fall back to a
// uniform PDF. Output is sorted; uses stratified u values.
template <typename RngT>
std::vector<double> sample_pdf(const std::vector<double>& weights,
                               const std::vector<double>& depths, int count,
                               RngT& rng) {
  require(weights.size() == depths.size() && !weights.empty(),
          "sample_pdf: weights and depths must align");
  const std::size_t n = weights.size();
  std::vector<double> edges(n + 1);
  edges[0] = depths[0];
  for (std::size_t i = 1; i < n; ++i) edges[i] = 0.5 * (depths[i - 1] + depths[i]);
  edges[n] = depths[n - 1];

  double total = 0;
  for (double w : weights) {
    require(w >= 0, "sample_pdf: negative weight");
    total += w;
  }
  std::vector<double> mass(n);
  if (total <= 0) {
    for (std::size_t i = 0; i < n; ++i) mass[i] = 1.0 / n;  // uniform fallback
  } else {
    for (std::size_t i = 0; i < n; ++i) mass[i] = weights[i] / total;
  }
  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + mass[i];
  cdf[n] = 1.0;

  std::vector<double> out(count);
  for (int k = 0; k < count; ++k) {
    double u = (k + rng.uniform()) / count;
    auto it = std::upper_bound(cdf.begin(), cdf.end() - 1, u);
    std::size_t j = std::max<std::ptrdiff_t>(0, it - cdf.begin() - 1);
    double seg = cdf[j + 1] - cdf[j];
    double frac = seg > 0 ? (u - cdf[j]) / seg : 0.5;
    out[k] = edges[j] + frac * (edges[j + 1] - edges[j]);
  }
  return out;  // sorted: u is increasing and the CDF is monotone
}

// Fine pass: importance depths merged and sorted with the coarse depths.
template <typename RngT>
std::vector<double> importance_samples(const std::vector<double>& weights,
                                       const std::vector<double>& depths,
                                       int fine_count, RngT& rng) {
  std::vector<double> merged = depths;
  std::vector<double> fine = sample_pdf(weights, depths, fine_count, rng);
  merged.insert(merged.end(), fine.begin(), fine.end());
  std::sort(merged.begin(), merged.end());
  return merged;
}

// Interval widths for compositing: delta_i = t_{i+1} - t_i with the last
// interval running to `far`. Duplicated depths are kept; widths are floored
// at 1e-6 so degenerate intervals stay positive.
inline std::vector<double> deltas_from_depths(const std::vector<double>& depths,
                                              double far) {
  std::vector<double> out(depths.size());
  for (std::size_t i = 0; i + 1 < depths.size(); ++i)
    out[i] = std::max(depths[i + 1] - depths[i], 1e-6);
  out.back() = std::max(far - depths.back(), 1e-6);
  return out;
}

}  // namespace nfbench
