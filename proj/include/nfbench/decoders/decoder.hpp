#pragma once

// The three conditional neural-field decoder families under comparison.
//
// All three map encoded coordinates [B, in_dim] plus one instance's latent
// to task outputs [B, out_dim], with color channels squashed by a sigmoid
// and density (when present) by a softplus. Batching across instances is a
// loop at the call site; within an instance every sample shares the latent.

#include <cstdint>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "nfbench/core/graph.hpp"
#include "nfbench/core/param_store.hpp"
#include "nfbench/core/rng.hpp"
#include "nfbench/decoders/config.hpp"

namespace nfbench {

template <typename T>
struct ParamBinder {
  Graph<T>& g;
  ParamStore<T>& store;
  bool frozen = false;  // frozen: constants in the graph, no gradients

  Var<T> operator()(const std::string& name) const {
    return frozen ? store.const_var(g, name) : store.var(g, name);
  }
};

// One instance's conditioning state, in whichever view the family needs.
template <typename T>
struct LatentInput {
  Var<T> flat;    // [1, m]            (concat, hyper)
  Var<T> tokens;  // [P, token_width]  (attention)
  Var<T> embed;   // [P, E] per-token embedding, or [1, E] for flat latents
};

// z row repeated for each sample: ones [B,1] x z [1,C]
template <typename T>
Var<T> broadcast_rows(const Var<T>& row, int rows) {
  Graph<T>& g = *row.graph;
  require(g.shape(row.id).size() == 2 && g.shape(row.id)[0] == 1,
          "broadcast_rows: expected [1,C], got " + shape_str(g.shape(row.id)));
  return matmul(g.constant(Tensor<T>::full({rows, 1}, T(1))), row);
}

template <typename T>
Var<T> dense(const ParamBinder<T>& p, const std::string& prefix,
             const Var<T>& x) {
  return add(matmul(x, p(prefix + "/w")), p(prefix + "/b"));
}

template <typename T>
Var<T> apply_output_head(const Var<T>& h, OutputKind kind) {
  if (kind == OutputKind::kRgb) return sigmoid(h);
  Var<T> rgb = sigmoid(slice(h, 1, 0, 3));
  Var<T> density = softplus(slice(h, 1, 3, 1));
  return concat(rgb, density, 1);
}

// Optional cache of hyper-network outputs for frozen-parameter rendering,
// keyed by instance. Concurrent reads, single-writer insertion.
template <typename T>
class HyperWeightCache {
 public:
  const Tensor<T>* find(std::int64_t key) const {
    std::shared_lock lock(mu_);
    auto it = cache_.find(key);
    return it == cache_.end() ? nullptr : &it->second;
  }
  const Tensor<T>& insert(std::int64_t key, Tensor<T> value) {
    std::unique_lock lock(mu_);
    return cache_.emplace(key, std::move(value)).first->second;
  }
  void clear() {
    std::unique_lock lock(mu_);
    cache_.clear();
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::int64_t, Tensor<T>> cache_;
};

template <typename T>
class Decoder {
 public:
  explicit Decoder(DecoderConfig cfg, std::string prefix = "dec")
      : cfg_(std::move(cfg)), prefix_(std::move(prefix)) {
    cfg_.validate();
  }

  const DecoderConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

  void init_params(ParamStore<T>& store, CounterRng& rng) const {
    switch (cfg_.family) {
      case Family::kConcat: {
        auto dims = concat_layer_dims(cfg_);
        for (int l = 0; l < cfg_.depth; ++l) {
          store.create_glorot(layer_name(l) + "/w", dims[l].first,
                              dims[l].second, rng);
          store.create(layer_name(l) + "/b", {dims[l].second});
        }
        break;
      }
      case Family::kHyper: {
        const int pin = cfg_.hyper_input_dim();
        const int hw = cfg_.hyper_width;
        const int pred = static_cast<int>(hyper_predicted_count(cfg_));
        store.create_glorot(prefix_ + "/psi0/w", pin, hw, rng);
        store.create(prefix_ + "/psi0/b", {hw});
        // The regressor's output bias carries the primary network's usual
        // init, with the weight part scaled down: the predicted MLP then
        // starts at a trainable operating point instead of all-zero layers.
        Tensor<T>& w1 = store.create_glorot(prefix_ + "/psi1/w", hw, pred, rng);
        for (std::size_t i = 0; i < w1.size(); ++i) w1[i] *= T(0.125);
        Tensor<T>& b1 = store.create(prefix_ + "/psi1/b", {pred});
        std::size_t off = 0;
        for (auto [in, out] : mlp_layer_dims(cfg_.in_dim, cfg_.hidden_width,
                                             cfg_.depth, cfg_.out_dim())) {
          double bound = std::sqrt(6.0 / (in + out));
          for (int i = 0; i < in * out; ++i)
            b1[off + i] = static_cast<T>(rng.uniform(-bound, bound));
          off += static_cast<std::size_t>(in) * out + out;  // biases stay zero
        }
        break;
      }
      case Family::kAttention: {
        const int k = cfg_.hidden_width, kd = cfg_.key_dim;
        const int we = cfg_.effective_token_width();
        store.create_glorot(prefix_ + "/q0/w", cfg_.in_dim, k, rng);
        store.create(prefix_ + "/q0/b", {k});
        for (int s = 0; s < cfg_.attention_stages; ++s) {
          std::string sp = stage_name(s);
          store.create_glorot(sp + "/wq/w", k, kd, rng);
          store.create(sp + "/wq/b", {kd});
          store.create_glorot(sp + "/wk/w", we, kd, rng);
          store.create(sp + "/wk/b", {kd});
          store.create_glorot(sp + "/wv/w", we, kd, rng);
          store.create(sp + "/wv/b", {kd});
          store.create_glorot(sp + "/wo/w", kd, k, rng);
          store.create(sp + "/wo/b", {k});
          for (int d = 0; d < cfg_.dense_per_stage; ++d) {
            store.create_glorot(sp + "/mlp" + std::to_string(d) + "/w", k, k,
                                rng);
            store.create(sp + "/mlp" + std::to_string(d) + "/b", {k});
          }
        }
        store.create_glorot(prefix_ + "/head/w", k, cfg_.out_dim(), rng);
        store.create(prefix_ + "/head/b", {cfg_.out_dim()});
        break;
      }
    }
  }

  Var<T> forward(const ParamBinder<T>& p, const Var<T>& coords,
                 const LatentInput<T>& z) const {
    const Shape& cs = p.g.shape(coords.id);
    require(cs.size() == 2 && cs[1] == cfg_.in_dim,
            "decoder: coords " + shape_str(cs) + " do not match in_dim " +
                std::to_string(cfg_.in_dim));
    switch (cfg_.family) {
      case Family::kConcat: return forward_concat(p, coords, z);
      case Family::kHyper: return forward_hyper(p, coords, z);
      case Family::kAttention: return forward_attention(p, coords, z);
    }
    fail("unreachable");
  }

  // instrumentation
  mutable std::int64_t hyper_net_evals = 0;
  mutable std::vector<Tensor<T>>* attention_probe = nullptr;

 private:
  std::string layer_name(int l) const {
    return prefix_ + "/l" + std::to_string(l);
  }
  std::string stage_name(int s) const {
    return prefix_ + "/s" + std::to_string(s);
  }

  void check_flat(const ParamBinder<T>& p, const Var<T>& flat) const {
    const Shape& zs = p.g.shape(flat.id);
    require(zs.size() == 2 && zs[0] == 1 && zs[1] == cfg_.latent_dim,
            "decoder: latent " + shape_str(zs) + " does not match latent_dim " +
                std::to_string(cfg_.latent_dim));
  }

  Var<T> forward_concat(const ParamBinder<T>& p, const Var<T>& coords,
                        const LatentInput<T>& z) const {
    const int B = p.g.shape(coords.id)[0];
    std::vector<std::vector<SplitPiece>> per_layer(cfg_.depth);
    if (cfg_.latent_dim > 0) {
      check_flat(p, z.flat);
      for (const SplitPiece& piece : split_schedule(cfg_))
        per_layer[piece.layer].push_back(piece);
    }
    Var<T> skip_input;  // [B, in+m], built lazily for the skip variant
    Var<T> h = coords;
    for (int l = 0; l < cfg_.depth; ++l) {
      for (const SplitPiece& piece : per_layer[l]) {
        Var<T> sub = broadcast_rows(
            slice(z.flat, 1, piece.offset, piece.extent), B);
        if (cfg_.concat_skip && l == 0) skip_input = concat(coords, sub, 1);
        h = concat(h, sub, 1);
      }
      if (cfg_.concat_skip && l == cfg_.depth / 2) {
        require(skip_input.valid(), "decoder: skip variant needs a latent");
        h = concat(h, skip_input, 1);
      }
      h = dense(p, layer_name(l), h);
      if (l < cfg_.depth - 1) h = relu(h);
    }
    return apply_output_head(h, cfg_.output);
  }

  Var<T> forward_hyper(const ParamBinder<T>& p, const Var<T>& coords,
                       const LatentInput<T>& z) const {
    check_flat(p, z.flat);
    Var<T> psi_in = z.flat;
    if (cfg_.use_token_embedding) {
      require(z.embed.valid(), "decoder: token embedding enabled but missing");
      psi_in = concat(psi_in, z.embed, 1);
    }
    Var<T> hidden = relu(dense(p, prefix_ + "/psi0", psi_in));
    Var<T> predicted = dense(p, prefix_ + "/psi1", hidden);  // [1, pred]
    ++hyper_net_evals;
    return primary_from_weights(coords, predicted);
  }

  Var<T> primary_from_weights(const Var<T>& coords,
                              const Var<T>& predicted) const {
    auto dims = mlp_layer_dims(cfg_.in_dim, cfg_.hidden_width, cfg_.depth,
                               cfg_.out_dim());
    Var<T> h = coords;
    int off = 0;
    for (int l = 0; l < cfg_.depth; ++l) {
      auto [in, out] = dims[l];
      Var<T> w = reshape(slice(predicted, 1, off, in * out), {in, out});
      off += in * out;
      Var<T> b = reshape(slice(predicted, 1, off, out), {out});
      off += out;
      h = add(matmul(h, w), b);
      if (l < cfg_.depth - 1) h = relu(h);
    }
    return apply_output_head(h, cfg_.output);
  }

  Var<T> forward_attention(const ParamBinder<T>& p, const Var<T>& coords,
                           const LatentInput<T>& z) const {
    const Shape& ts = p.g.shape(z.tokens.id);
    require(ts.size() == 2 && ts[1] == cfg_.token_width,
            "decoder: tokens " + shape_str(ts) + " do not match token_width " +
                std::to_string(cfg_.token_width));
    Var<T> tok = z.tokens;
    if (cfg_.use_token_embedding) {
      require(z.embed.valid(), "decoder: token embedding enabled but missing");
      tok = concat(tok, z.embed, 1);
    }
    const int dh = cfg_.key_dim / cfg_.heads;
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));

    Var<T> q = dense(p, prefix_ + "/q0", coords);  // [B,k]
    for (int s = 0; s < cfg_.attention_stages; ++s) {
      std::string sp = stage_name(s);
      Var<T> qn = layer_norm(q);
      Var<T> Q = dense(p, sp + "/wq", qn);
      Var<T> K = dense(p, sp + "/wk", tok);
      Var<T> V = dense(p, sp + "/wv", tok);
      std::vector<Var<T>> head_outs;
      for (int hidx = 0; hidx < cfg_.heads; ++hidx) {
        Var<T> Qh = slice(Q, 1, hidx * dh, dh);
        Var<T> Kh = slice(K, 1, hidx * dh, dh);
        Var<T> Vh = slice(V, 1, hidx * dh, dh);
        Var<T> scores = scale(matmul(Qh, transpose(Kh)), inv_sqrt_dh);
        Var<T> probs = softmax(scores, 1);  // [B,P]
        if (attention_probe) attention_probe->push_back(probs.tensor());
        head_outs.push_back(matmul(probs, Vh));
      }
      Var<T> attn = concat(head_outs, 1);  // [B,kd]
      q = add(q, dense(p, sp + "/wo", attn));
      Var<T> d = layer_norm(q);
      for (int j = 0; j < cfg_.dense_per_stage; ++j) {
        d = dense(p, sp + "/mlp" + std::to_string(j), d);
        if (j + 1 < cfg_.dense_per_stage) d = relu(d);
      }
      q = add(q, d);
    }
    return apply_output_head(dense(p, prefix_ + "/head", layer_norm(q)),
                             cfg_.output);
  }

  DecoderConfig cfg_;
  std::string prefix_;
};

// Frozen-parameter fast path for the hyper family: regress the weight set
// once per instance and reuse it across render calls.
template <typename T>
Var<T> hyper_forward_cached(const Decoder<T>& dec, const ParamBinder<T>& p,
                            const Var<T>& coords, const Tensor<T>& flat_latent,
                            const Tensor<T>& embed, std::int64_t instance,
                            HyperWeightCache<T>& cache) {
  require(dec.config().family == Family::kHyper,
          "hyper_forward_cached: not a hyper decoder");
  const Tensor<T>* weights = cache.find(instance);
  if (!weights) {
    Graph<T> side;
    ParamBinder<T> sp{side, p.store, /*frozen=*/true};
    Var<T> z = side.constant(flat_latent);
    if (dec.config().use_token_embedding) z = concat(z, side.constant(embed), 1);
    Var<T> hidden = relu(dense(sp, dec.prefix() + "/psi0", z));
    Var<T> predicted = dense(sp, dec.prefix() + "/psi1", hidden);
    ++dec.hyper_net_evals;
    weights = &cache.insert(instance, predicted.tensor());
  }
  // replay the primary MLP against the cached weight vector
  auto& cfg = dec.config();
  auto dims = mlp_layer_dims(cfg.in_dim, cfg.hidden_width, cfg.depth,
                             cfg.out_dim());
  Var<T> pred = p.g.constant_view(weights->data(), weights->shape());
  Var<T> h = coords;
  int off = 0;
  for (int l = 0; l < cfg.depth; ++l) {
    auto [in, out] = dims[l];
    Var<T> w = reshape(slice(pred, 1, off, in * out), {in, out});
    off += in * out;
    Var<T> b = reshape(slice(pred, 1, off, out), {out});
    off += out;
    h = add(matmul(h, w), b);
    if (l < cfg.depth - 1) h = relu(h);
  }
  return apply_output_head(h, cfg.output);
}

}  // namespace nfbench
