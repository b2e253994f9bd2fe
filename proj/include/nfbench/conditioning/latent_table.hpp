#pragma once

// Auto-decoding state: one trainable latent row per training instance
// (zero-initialized), plus an optional per-token embedding shared across
// all instances (normal-initialized). Rows referenced in a batch are
// updated by a sparse Adam step; untouched rows stay bit-identical.

#include <set>
#include <string>
#include <vector>

#include "nfbench/core/param_store.hpp"
#include "nfbench/decoders/decoder.hpp"

namespace nfbench {

template <typename T>
class LatentTable {
 public:
  LatentTable(int instance_count, const DecoderConfig& dec_cfg, CounterRng& rng)
      : instances_(instance_count),
        latent_dim_(dec_cfg.latent_dim),
        token_width_(dec_cfg.family == Family::kAttention ? dec_cfg.token_width
                                                          : dec_cfg.latent_dim),
        use_embedding_(dec_cfg.use_token_embedding) {
    require(instance_count > 0, "latent table: empty instance set");
    require(latent_dim_ % token_width_ == 0,
            "latent table: latent_dim not a multiple of token width");
    for (int i = 0; i < instance_count; ++i)
      store_.create(row_name(i), {1, latent_dim_});  // zeros
    if (use_embedding_)
      store_.create_normal("emb", {token_count(), dec_cfg.token_embed_dim},
                           1.0, rng);
  }

  int instances() const { return instances_; }
  int latent_dim() const { return latent_dim_; }
  int token_count() const { return latent_dim_ / token_width_; }

  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

  const Tensor<T>& row(int instance) const {
    return store_.value(row_name(check_id(instance)));
  }
  Tensor<T>& row(int instance) {
    return store_.value(row_name(check_id(instance)));
  }
  const Tensor<T>& embedding() const { return store_.value("emb"); }
  bool has_embedding() const { return use_embedding_; }

  // Binds one instance's latent into a graph and notes it as touched for
  // the next sparse step.
  LatentInput<T> latent(Graph<T>& g, int instance) {
    check_id(instance);
    touched_.insert(instance);
    LatentInput<T> z;
    z.flat = store_.var(g, row_name(instance));
    if (token_count() > 1 || token_width_ != latent_dim_)
      z.tokens = reshape(z.flat, {token_count(), token_width_});
    else
      z.tokens = z.flat;
    if (use_embedding_) z.embed = store_.var(g, "emb");
    return z;
  }

  // Frozen view for evaluation/rendering.
  LatentInput<T> latent_const(Graph<T>& g, int instance) const {
    check_id(instance);
    LatentInput<T> z;
    z.flat = store_.const_var(g, row_name(instance));
    z.tokens = reshape(z.flat, {token_count(), token_width_});
    if (use_embedding_) z.embed = store_.const_var(g, "emb");
    return z;
  }

  // Sparse Adam: only rows touched since the last step move (plus the
  // shared embedding). The step counter advances once.
  void step(const AdamConfig& cfg) {
    std::vector<std::string> names;
    for (int id : touched_) names.push_back(row_name(id));
    if (use_embedding_ && !touched_.empty()) names.push_back("emb");
    if (!names.empty()) store_.adam_step_sparse(cfg, names);
    touched_.clear();
  }

  const std::set<int>& touched() const { return touched_; }

 private:
  int check_id(int instance) const {
    require(instance >= 0 && instance < instances_,
            "latent table: unknown instance id " + std::to_string(instance));
    return instance;
  }
  static std::string row_name(int i) { return "row/" + std::to_string(i); }

  int instances_;
  int latent_dim_;
  int token_width_;
  bool use_embedding_;
  ParamStore<T> store_;
  std::set<int> touched_;
};

}  // namespace nfbench
