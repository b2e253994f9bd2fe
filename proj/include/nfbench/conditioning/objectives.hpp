#pragma once

// Training objectives for the two conditioning regimes, and test-time
// latent recovery against a frozen decoder.

#include <vector>

#include "nfbench/conditioning/encoder.hpp"
#include "nfbench/conditioning/latent_table.hpp"
#include "nfbench/decoders/decoder.hpp"

namespace nfbench {

struct RegularizerConfig {
  enum class Kind { kNone, kSquaredNorm };
  Kind kind = Kind::kNone;
  double weight = 0.0;
};

inline RegularizerConfig squared_norm_reg(double weight) {
  return {RegularizerConfig::Kind::kSquaredNorm, weight};
}

// rho(z) averaged over the batch rows; zero Var when disabled
template <typename T>
Var<T> regularizer_term(Graph<T>& g, const std::vector<Var<T>>& latents,
                        const RegularizerConfig& reg) {
  if (reg.kind == RegularizerConfig::Kind::kNone || reg.weight == 0.0 ||
      latents.empty())
    return g.constant(Tensor<T>({1}, {T(0)}));
  std::vector<Var<T>> terms;
  terms.reserve(latents.size());
  for (const Var<T>& z : latents) terms.push_back(reduce_sum(mul(z, z)));
  Var<T> total = terms.size() == 1 ? terms[0] : reduce_sum(concat(terms, 0));
  return scale(total, static_cast<T>(reg.weight / latents.size()));
}

template <typename T>
LatentInput<T> latent_from_tokens(const DecoderConfig& cfg, Var<T> tokens) {
  LatentInput<T> z;
  z.tokens = tokens;
  const Shape& s = tokens.graph->shape(tokens.id);
  z.flat = reshape(tokens, {1, s[0] * s[1]});
  return z;
}

// Mean squared reconstruction error over the sampled pixels of each image
// in the batch; encoder and decoder gradients both flow.
//
// images: [H*W, 3] raster rows per image; encoded_coords: [H*W, in_dim]
// for the full pixel grid; pixel_ids: sampled rows per image.
template <typename T>
Var<T> autoencoder_loss(const ParamBinder<T>& p, const ImageEncoder<T>& enc,
                        const Decoder<T>& dec,
                        const std::vector<const Tensor<T>*>& images,
                        const Tensor<T>& encoded_coords,
                        const std::vector<std::vector<int>>& pixel_ids) {
  require(!images.empty() && images.size() == pixel_ids.size(),
          "autoencoder_loss: batch mismatch");
  const DecoderConfig& dcfg = dec.config();
  if (dcfg.family == Family::kAttention)
    require(dcfg.token_width == enc.config().token_out_dim,
            "autoencoder_loss: decoder token width does not match encoder");
  else
    require(dcfg.latent_dim == enc.config().latent_dim(),
            "autoencoder_loss: decoder latent_dim does not match encoder");

  Graph<T>& g = p.g;
  std::vector<Var<T>> preds, targets;
  for (std::size_t b = 0; b < images.size(); ++b) {
    Var<T> tokens = enc.encode(p, g.constant_view(images[b]->data(),
                                                  images[b]->shape()));
    LatentInput<T> z = latent_from_tokens(dcfg, tokens);
    const std::vector<int>& ids = pixel_ids[b];
    Tensor<T> coords({static_cast<int>(ids.size()), encoded_coords.cols()});
    Tensor<T> target({static_cast<int>(ids.size()), 3});
    for (std::size_t r = 0; r < ids.size(); ++r) {
      for (int c = 0; c < encoded_coords.cols(); ++c)
        coords.at(static_cast<int>(r), c) = encoded_coords.at(ids[r], c);
      for (int c = 0; c < 3; ++c)
        target.at(static_cast<int>(r), c) = images[b]->at(ids[r], c);
    }
    preds.push_back(dec.forward(p, g.constant(std::move(coords)), z));
    targets.push_back(g.constant(std::move(target)));
  }
  return mse(concat(preds, 0), concat(targets, 0));
}

// MSE over sampled pixels plus rho(z); gradients reach the decoder and the
// referenced latent rows only.
template <typename T>
Var<T> autodecoder_loss(const ParamBinder<T>& p, const Decoder<T>& dec,
                        LatentTable<T>& table,
                        const std::vector<int>& instance_ids,
                        const std::vector<Tensor<T>>& coords,
                        const std::vector<Tensor<T>>& targets,
                        const RegularizerConfig& reg) {
  require(instance_ids.size() == coords.size() &&
              instance_ids.size() == targets.size() && !instance_ids.empty(),
          "autodecoder_loss: batch mismatch");
  Graph<T>& g = p.g;
  std::vector<Var<T>> preds, target_vars, latents;
  for (std::size_t b = 0; b < instance_ids.size(); ++b) {
    LatentInput<T> z = table.latent(g, instance_ids[b]);
    latents.push_back(z.flat);
    preds.push_back(dec.forward(p, g.constant(coords[b]), z));
    target_vars.push_back(g.constant(targets[b]));
  }
  Var<T> rec = mse(concat(preds, 0), concat(target_vars, 0));
  return add(rec, regularizer_term(g, latents, reg));
}

// Recovers a latent for new observations by gradient descent from zero,
// keeping the decoder parameters constant. The shared embedding (if any) is
// frozen too. Returns the optimized latent row [1, m].
template <typename T>
Tensor<T> test_time_optimize(const Decoder<T>& dec, ParamStore<T>& dec_store,
                             std::type_identity_t<const Tensor<T>*> frozen_embed,
                             const Tensor<T>& coords, const Tensor<T>& targets,
                             int steps, const AdamConfig& opt,
                             const RegularizerConfig& reg) {
  const DecoderConfig& cfg = dec.config();
  ParamStore<T> latent_store;
  latent_store.create("z", {1, cfg.latent_dim});
  for (int s = 0; s < steps; ++s) {
    Graph<T> g;
    ParamBinder<T> frozen{g, dec_store, /*frozen=*/true};
    Var<T> zvar = latent_store.var(g, "z");
    LatentInput<T> z;
    z.flat = zvar;
    if (cfg.family == Family::kAttention)
      z.tokens = reshape(zvar, {cfg.token_count(), cfg.token_width});
    if (cfg.use_token_embedding) {
      require(frozen_embed, "test_time_optimize: missing shared embedding");
      z.embed = g.constant_view(frozen_embed->data(), frozen_embed->shape());
    }
    Var<T> pred = dec.forward(frozen, g.constant(coords), z);
    Var<T> loss = mse(pred, g.constant(targets));
    loss = add(loss, regularizer_term(g, {zvar}, reg));
    g.backward(loss);
    latent_store.adam_step(opt);
  }
  return latent_store.value("z");
}

}  // namespace nfbench
