#pragma once

// Convolutional image encoder producing set-latent tokens: a stack of
// stride-2 3x3 conv stages, patch extraction from the final feature map,
// and one multi-head self-attention layer projecting the patch tokens to
// their output width. Flatten the tokens for flat-latent decoders.

#include <string>
#include <vector>

#include "nfbench/core/graph.hpp"
#include "nfbench/core/param_store.hpp"
#include "nfbench/core/rng.hpp"
#include "nfbench/decoders/decoder.hpp"

namespace nfbench {

struct EncoderConfig {
  int image_size = 32;                       // square H = W
  std::vector<int> channels = {32, 64, 128, 128};  // one stride-2 stage each
  int patch_cells = 1;     // patch is p x p cells of the final feature map
  int token_out_dim = 32;  // G: output token width
  int attn_heads = 4;
  int attn_dim = 64;  // query/key/value width of the self-attention layer

  int stage_count() const { return static_cast<int>(channels.size()); }
  int feature_depth() const { return channels.back(); }  // D

  int feature_map_size() const {  // M
    int m = image_size;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      require(m % 2 == 0, "encoder: image size not divisible by 2^stages");
      m /= 2;
    }
    return m;
  }

  int patch_count() const {  // P
    int m = feature_map_size();
    require(patch_cells >= 1 && m % patch_cells == 0,
            "encoder: patch size " + std::to_string(patch_cells) +
                " does not tile the " + std::to_string(m) + "x" +
                std::to_string(m) + " feature map");
    int side = m / patch_cells;
    return side * side;
  }

  int token_in_dim() const {  // F
    return patch_cells * patch_cells * feature_depth();
  }

  int latent_dim() const { return patch_count() * token_out_dim; }  // N = P*G

  void validate() const {
    require(!channels.empty(), "encoder: no conv stages");
    require(feature_map_size() >= 1, "encoder: too many stages for image");
    (void)patch_count();
    require(attn_dim % attn_heads == 0,
            "encoder: attn_dim not divisible by heads");
  }
};

// Sweep helper: fixes the token width G and varies the patch size so that
// P * G = latent_dim, mirroring how the bottleneck is scaled at a constant
// per-token dimensionality.
inline EncoderConfig encoder_config_for(int image_size, int latent_dim,
                                        int token_out_dim,
                                        std::vector<int> channels = {32, 64,
                                                                     128,
                                                                     128}) {
  EncoderConfig cfg;
  cfg.image_size = image_size;
  cfg.channels = std::move(channels);
  cfg.token_out_dim = token_out_dim;
  require(latent_dim % token_out_dim == 0,
          "encoder sweep: latent_dim " + std::to_string(latent_dim) +
              " not a multiple of token width " + std::to_string(token_out_dim));
  int patches = latent_dim / token_out_dim;
  int side = 1;
  while (side * side < patches) ++side;
  require(side * side == patches,
          "encoder sweep: patch count " + std::to_string(patches) +
              " is not a square");
  int m = cfg.feature_map_size();
  require(m % side == 0, "encoder sweep: cannot tile " + std::to_string(m) +
                             "x" + std::to_string(m) + " map into " +
                             std::to_string(patches) + " patches");
  cfg.patch_cells = m / side;
  cfg.validate();
  require(cfg.latent_dim() == latent_dim, "encoder sweep: internal mismatch");
  return cfg;
}

namespace detail {

// index table mapping [out_pixel * 9] -> input row (-1 pads with zeros), for
// a 3x3 stride-2 same-padding convolution over an s x s input
inline std::vector<int> conv3x3_s2_indices(int s) {
  int so = s / 2;
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(so) * so * 9);
  for (int oy = 0; oy < so; ++oy)
    for (int ox = 0; ox < so; ++ox)
      for (int ky = -1; ky <= 1; ++ky)
        for (int kx = -1; kx <= 1; ++kx) {
          int iy = 2 * oy + ky, ix = 2 * ox + kx;
          idx.push_back((iy < 0 || iy >= s || ix < 0 || ix >= s)
                            ? -1
                            : iy * s + ix);
        }
  return idx;
}

// rows of the final M x M feature map covered by patch q, in raster order
inline std::vector<int> patch_indices(int m, int patch_cells, int q) {
  int side = m / patch_cells;
  int py = q / side, px = q % side;
  std::vector<int> idx;
  for (int y = 0; y < patch_cells; ++y)
    for (int x = 0; x < patch_cells; ++x)
      idx.push_back((py * patch_cells + y) * m + (px * patch_cells + x));
  return idx;
}

}  // namespace detail

template <typename T>
class ImageEncoder {
 public:
  explicit ImageEncoder(EncoderConfig cfg, std::string prefix = "enc")
      : cfg_(std::move(cfg)), prefix_(std::move(prefix)) {
    cfg_.validate();
  }

  const EncoderConfig& config() const { return cfg_; }

  void init_params(ParamStore<T>& store, CounterRng& rng) const {
    int in_ch = 3;
    for (int s = 0; s < cfg_.stage_count(); ++s) {
      store.create_glorot(conv_name(s) + "/w", 9 * in_ch, cfg_.channels[s], rng);
      store.create(conv_name(s) + "/b", {cfg_.channels[s]});
      in_ch = cfg_.channels[s];
    }
    const int F = cfg_.token_in_dim();
    store.create_glorot(prefix_ + "/sa/wq/w", F, cfg_.attn_dim, rng);
    store.create(prefix_ + "/sa/wq/b", {cfg_.attn_dim});
    store.create_glorot(prefix_ + "/sa/wk/w", F, cfg_.attn_dim, rng);
    store.create(prefix_ + "/sa/wk/b", {cfg_.attn_dim});
    store.create_glorot(prefix_ + "/sa/wv/w", F, cfg_.attn_dim, rng);
    store.create(prefix_ + "/sa/wv/b", {cfg_.attn_dim});
    store.create_glorot(prefix_ + "/sa/wo/w", cfg_.attn_dim,
                        cfg_.token_out_dim, rng);
    store.create(prefix_ + "/sa/wo/b", {cfg_.token_out_dim});
  }

  // image: [H*W, 3] rows in raster order, values in [0,1].
  // Returns tokens [P, G].
  Var<T> encode(const ParamBinder<T>& p, const Var<T>& image) const {
    const Shape& s = p.g.shape(image.id);
    require(s.size() == 2 && s[0] == cfg_.image_size * cfg_.image_size &&
                s[1] == 3,
            "encoder: image " + shape_str(s) + " does not match " +
                std::to_string(cfg_.image_size) + "x" +
                std::to_string(cfg_.image_size) + "x3");
    Var<T> h = image;
    int side = cfg_.image_size;
    for (int st = 0; st < cfg_.stage_count(); ++st) {
      std::vector<int> idx = detail::conv3x3_s2_indices(side);
      side /= 2;
      // [side*side*9, C] -> [side*side, 9C] -> conv as one matmul
      Var<T> cols = reshape(gather_rows(h, idx),
                            {side * side, 9 * p.g.shape(h.id)[1]});
      h = relu(dense(p, conv_name(st), cols));
    }
    // patches -> tokens [P, F]
    const int M = cfg_.feature_map_size();
    const int P = cfg_.patch_count();
    std::vector<Var<T>> patch_rows;
    patch_rows.reserve(P);
    for (int q = 0; q < P; ++q) {
      std::vector<int> idx = detail::patch_indices(M, cfg_.patch_cells, q);
      patch_rows.push_back(
          reshape(gather_rows(h, idx), {1, cfg_.token_in_dim()}));
    }
    Var<T> tokens = P == 1 ? patch_rows[0] : concat(patch_rows, 0);

    // one multi-head self-attention layer, F -> G
    const int dh = cfg_.attn_dim / cfg_.attn_heads;
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));
    Var<T> Q = dense(p, prefix_ + "/sa/wq", tokens);
    Var<T> K = dense(p, prefix_ + "/sa/wk", tokens);
    Var<T> V = dense(p, prefix_ + "/sa/wv", tokens);
    std::vector<Var<T>> heads;
    for (int hd = 0; hd < cfg_.attn_heads; ++hd) {
      Var<T> Qh = slice(Q, 1, hd * dh, dh);
      Var<T> Kh = slice(K, 1, hd * dh, dh);
      Var<T> Vh = slice(V, 1, hd * dh, dh);
      Var<T> probs = softmax(scale(matmul(Qh, transpose(Kh)), inv_sqrt_dh), 1);
      heads.push_back(matmul(probs, Vh));
    }
    return dense(p, prefix_ + "/sa/wo", concat(heads, 1));  // [P, G]
  }

 private:
  std::string conv_name(int s) const {
    return prefix_ + "/conv" + std::to_string(s);
  }

  EncoderConfig cfg_;
  std::string prefix_;
};

}  // namespace nfbench
