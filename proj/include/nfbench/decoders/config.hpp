#pragma once

// Architecture selection and hyper-parameters for the three conditional
// decoder families, the split schedule for concatenation, and exact
// trainable-parameter accounting.

#include <string>
#include <vector>

#include "nfbench/core/tensor.hpp"

namespace nfbench {

enum class Family { kConcat, kHyper, kAttention };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::kConcat: return "concat";
    case Family::kHyper: return "hyper";
    case Family::kAttention: return "attention";
  }
  return "?";
}

inline Family family_from_name(const std::string& s) {
  if (s == "concat") return Family::kConcat;
  if (s == "hyper") return Family::kHyper;
  if (s == "attention") return Family::kAttention;
  fail("unknown decoder family '" + s + "'");
}

enum class OutputKind {
  kRgb,       // 3 channels, sigmoid
  kRgbSigma,  // 3 sigmoid color channels + softplus density
};

struct DecoderConfig {
  Family family = Family::kConcat;

  int hidden_width = 256;  // k: MLP width, also the attention query width
  int depth = 8;           // linear layers including the output head

  int attention_stages = 5;
  int dense_per_stage = 3;
  int heads = 16;
  int key_dim = 256;  // total across heads

  int hyper_width = 64;  // internal width of the weight-regressing MLP

  int latent_dim = 0;   // m (aka N): flat latent size = token_width * tokens
  int token_width = 128;
  int token_embed_dim = 64;
  bool use_token_embedding = false;

  int concat_splits = 0;    // 0: derive from latent_dim
  bool concat_skip = false; // re-concat the full input at the middle layer

  int in_dim = 0;  // encoded coordinate dimension
  OutputKind output = OutputKind::kRgb;

  int out_dim() const { return output == OutputKind::kRgb ? 3 : 4; }

  int token_count() const {
    require(token_width > 0 && latent_dim % token_width == 0,
            "latent_dim " + std::to_string(latent_dim) +
                " is not a multiple of token_width " +
                std::to_string(token_width));
    return latent_dim / token_width;
  }

  // Split count: 8 for latents of 2048 and above, ceil(m/256) below.
  int splits() const {
    if (concat_splits > 0) return concat_splits;
    if (latent_dim <= 0) return 0;
    if (latent_dim >= 2048) return 8;
    return (latent_dim + 255) / 256;
  }

  int effective_token_width() const {
    return token_width + (use_token_embedding ? token_embed_dim : 0);
  }

  int hyper_input_dim() const {
    return latent_dim + (use_token_embedding ? token_embed_dim : 0);
  }

  void validate() const {
    require(in_dim > 0, "decoder: in_dim must be set");
    require(hidden_width > 0 && depth >= 2, "decoder: bad width/depth");
    if (family == Family::kAttention) {
      require(key_dim % heads == 0,
              "decoder: key_dim " + std::to_string(key_dim) +
                  " not divisible by heads " + std::to_string(heads));
      (void)token_count();
    }
    if (family == Family::kConcat && latent_dim > 0) {
      require(splits() <= depth, "decoder: split count " +
                                     std::to_string(splits()) +
                                     " exceeds depth " + std::to_string(depth));
      if (concat_skip)
        require(splits() == 1,
                "decoder: skip connection variant uses an unsplit latent");
    }
  }
};

struct SplitPiece {
  int layer = 0;   // which linear layer's input receives this sub-code
  int offset = 0;  // column offset into the flat latent
  int extent = 0;
};

// Distributes the latent evenly into sub-codes concatenated to layers spread
// through the network. Extents differ by at most one.
inline std::vector<SplitPiece> split_schedule(int m, int depth, int splits) {
  require(m >= 1, "split_schedule: latent dimension must be >= 1");
  require(splits >= 1 && splits <= depth,
          "split_schedule: need 1 <= splits <= depth");
  std::vector<SplitPiece> out;
  int base = m / splits, rem = m % splits, offset = 0;
  for (int j = 0; j < splits; ++j) {
    SplitPiece p;
    p.layer = j * depth / splits;
    p.extent = base + (j < rem ? 1 : 0);
    p.offset = offset;
    offset += p.extent;
    out.push_back(p);
  }
  return out;
}

inline std::vector<SplitPiece> split_schedule(const DecoderConfig& cfg) {
  return split_schedule(cfg.latent_dim, cfg.depth, cfg.splits());
}

// Per-layer (fan_in, fan_out) of the concatenation MLP, including sub-code
// and skip columns. Single source of truth for construction, parameter
// counting and the bottleneck property.
inline std::vector<std::pair<int, int>> concat_layer_dims(
    const DecoderConfig& cfg) {
  std::vector<int> extra(cfg.depth, 0);
  if (cfg.latent_dim > 0)
    for (const SplitPiece& p : split_schedule(cfg)) extra[p.layer] += p.extent;
  if (cfg.concat_skip)
    extra[cfg.depth / 2] += cfg.in_dim + cfg.latent_dim;
  std::vector<std::pair<int, int>> dims;
  for (int l = 0; l < cfg.depth; ++l) {
    int in = (l == 0 ? cfg.in_dim : cfg.hidden_width) + extra[l];
    int out = (l == cfg.depth - 1) ? cfg.out_dim() : cfg.hidden_width;
    dims.emplace_back(in, out);
  }
  return dims;
}

// Plain MLP dims (the hyper-network's predicted primary network).
inline std::vector<std::pair<int, int>> mlp_layer_dims(int in_dim, int width,
                                                       int depth, int out_dim) {
  std::vector<std::pair<int, int>> dims;
  for (int l = 0; l < depth; ++l)
    dims.emplace_back(l == 0 ? in_dim : width,
                      l == depth - 1 ? out_dim : width);
  return dims;
}

inline std::size_t dims_param_count(
    const std::vector<std::pair<int, int>>& dims) {
  std::size_t n = 0;
  for (auto [in, out] : dims)
    n += static_cast<std::size_t>(in) * out + out;
  return n;
}

// Number of values the hyper-network must regress: every weight and bias of
// the primary MLP.
inline std::size_t hyper_predicted_count(const DecoderConfig& cfg) {
  return dims_param_count(
      mlp_layer_dims(cfg.in_dim, cfg.hidden_width, cfg.depth, cfg.out_dim()));
}

// Exact trainable-parameter count of the decoder itself. Latent table,
// shared token embeddings and the image encoder are accounted elsewhere.
inline std::size_t count_params(const DecoderConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.hidden_width;
  switch (cfg.family) {
    case Family::kConcat:
      return dims_param_count(concat_layer_dims(cfg));
    case Family::kHyper: {
      const std::size_t hw = cfg.hyper_width;
      const std::size_t pin = cfg.hyper_input_dim();
      const std::size_t pred = hyper_predicted_count(cfg);
      return pin * hw + hw      // latent -> hidden
             + hw * pred + pred;  // hidden -> predicted weights and biases
    }
    case Family::kAttention: {
      const std::size_t kd = cfg.key_dim;
      const std::size_t we = cfg.effective_token_width();
      std::size_t n = static_cast<std::size_t>(cfg.in_dim) * k + k;  // query proj
      std::size_t per_stage = k * kd + kd       // Wq
                              + we * kd + kd    // Wk
                              + we * kd + kd    // Wv
                              + kd * k + k;     // output proj
      per_stage += static_cast<std::size_t>(cfg.dense_per_stage) * (k * k + k);
      n += static_cast<std::size_t>(cfg.attention_stages) * per_stage;
      n += k * cfg.out_dim() + cfg.out_dim();  // head
      return n;
    }
  }
  return 0;
}

}  // namespace nfbench
