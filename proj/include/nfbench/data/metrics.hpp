#pragma once

// Reconstruction metrics. PSNR assumes values in [0,1] and reports
// +infinity for identical inputs.

#include <cmath>
#include <limits>

#include "nfbench/data/image.hpp"

namespace nfbench {

inline double mse(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height,
          "mse: image shapes differ (" + std::to_string(a.width) + "x" +
              std::to_string(a.height) + " vs " + std::to_string(b.width) +
              "x" + std::to_string(b.height) + ")");
  double acc = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    double d = double(a.rgb[i]) - double(b.rgb[i]);
    acc += d * d;
  }
  return acc / a.rgb.size();
}

inline double psnr_from_mse(double mse_value) {
  if (mse_value <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse_value);
}

inline double psnr(const Image& a, const Image& b) {
  return psnr_from_mse(mse(a, b));
}

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "psnr: shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = double(a[i]) - double(b[i]);
    acc += d * d;
  }
  return psnr_from_mse(acc / a.size());
}

}  // namespace nfbench
