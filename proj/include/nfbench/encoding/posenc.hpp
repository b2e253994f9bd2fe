#pragma once

// Sinusoidal positional encoding of coordinates normalized to [-1,1]:
// per scalar x, emits (sin(2^0 pi x), ..., sin(2^{l-1} pi x),
//                      cos(2^0 pi x), ..., cos(2^{l-1} pi x)),
// components concatenated in input order. Inputs are treated as constants:
// nothing here participates in differentiation.

#include <cmath>
#include <numbers>

#include "nfbench/core/tensor.hpp"

namespace nfbench {

struct PosEncConfig {
  int octaves = 10;              // l
  bool include_identity = false;  // prepend the raw coordinate per scalar

  int out_dim_per_scalar() const {
    return 2 * octaves + (include_identity ? 1 : 0);
  }
  int out_dim(int in_dim) const { return in_dim * out_dim_per_scalar(); }
};

// coords: [n, d] -> [n, d * (2l (+1))]
template <typename T>
Tensor<T> positional_encode(const Tensor<T>& coords, const PosEncConfig& cfg) {
  require(cfg.octaves > 0, "positional_encode: octave count must be >= 1");
  require(coords.shape().size() == 2,
          "positional_encode: expected [n,d] coordinates, got " +
              shape_str(coords.shape()));
  const int n = coords.rows(), d = coords.cols();
  const int per = cfg.out_dim_per_scalar();
  Tensor<T> out({n, d * per});
  const T pi = static_cast<T>(std::numbers::pi_v<double>);
  for (int r = 0; r < n; ++r) {
    T* dst = out.data() + static_cast<std::size_t>(r) * d * per;
    for (int c = 0; c < d; ++c) {
      T x = coords.at(r, c);
      T* o = dst + c * per;
      if (cfg.include_identity) *o++ = x;
      T freq = pi;
      for (int l = 0; l < cfg.octaves; ++l) {
        o[l] = std::sin(freq * x);
        o[cfg.octaves + l] = std::cos(freq * x);
        freq *= T(2);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> positional_encode_vec(const std::vector<T>& coords,
                                const PosEncConfig& cfg) {
  Tensor<T> in({1, static_cast<int>(coords.size())},
               std::vector<T>(coords));
  return positional_encode(in, cfg);
}

}  // namespace nfbench
