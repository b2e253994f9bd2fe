#pragma once

// Named parameter tensors plus per-parameter Adam moments and a step
// counter. Entries keep creation order, so walks and updates are
// deterministic. Gradients live alongside values and are aliased by graph
// leaves; they accumulate across graphs until a step clears them.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "nfbench/core/graph.hpp"
#include "nfbench/core/rng.hpp"
#include "nfbench/core/tensor.hpp"

namespace nfbench {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> m, v;
    bool bound = false;  // aliased into some graph since the last step
  };

  Tensor<T>& create(const std::string& name, Shape shape) {
    require(index_.find(name) == index_.end(),
            "parameter '" + name + "' already exists");
    Entry e;
    e.name = name;
    e.value = Tensor<T>(shape);
    e.grad = Tensor<T>(shape);
    e.m = Tensor<T>(shape);
    e.v = Tensor<T>(std::move(shape));
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(std::move(e));
    return entries_.back().value;
  }

  // Dense-layer weights: uniform in +-sqrt(6/(fan_in+fan_out)), shape [in,out].
  Tensor<T>& create_glorot(const std::string& name, int fan_in, int fan_out,
                           CounterRng& rng) {
    Tensor<T>& t = create(name, {fan_in, fan_out});
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<T>(rng.uniform(-bound, bound));
    return t;
  }

  Tensor<T>& create_normal(const std::string& name, Shape shape, double stddev,
                           CounterRng& rng) {
    Tensor<T>& t = create(name, std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<T>(stddev * rng.normal());
    return t;
  }

  bool has(const std::string& name) const {
    return index_.find(name) != index_.end();
  }

  Tensor<T>& value(const std::string& name) { return entry(name).value; }
  const Tensor<T>& value(const std::string& name) const { return entry(name).value; }
  Tensor<T>& grad(const std::string& name) { return entry(name).grad; }

  // Trainable leaf: gradients flow into this store.
  Var<T> var(Graph<T>& g, const std::string& name) {
    Entry& e = entry(name);
    e.bound = true;
    return g.leaf(e.value.data(), e.grad.data(), e.value.shape());
  }

  // Frozen view: constant in the graph, no gradient tracking.
  Var<T> const_var(Graph<T>& g, const std::string& name) const {
    const Entry& e = entry(name);
    return g.constant_view(e.value.data(), e.value.shape());
  }

  void zero_grad() {
    for (Entry& e : entries_) e.grad.zero();
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  std::size_t entry_count() const { return entries_.size(); }
  const Entry& entry_at(std::size_t i) const { return entries_[i]; }
  Entry& entry_at(std::size_t i) { return entries_[i]; }

  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }

  // Bias-corrected Adam over every entry. Requires each parameter to have
  // been bound into a graph since the previous step (its gradient slot is
  // then populated, possibly with zeros for unreachable parameters).
  // Gradients and bound flags are cleared afterwards.
  void adam_step(const AdamConfig& cfg) {
    for (const Entry& e : entries_)
      require(e.bound, "adam_step: missing gradient for parameter '" + e.name +
                           "' (never bound into a graph)");
    ++t_;
    for (Entry& e : entries_) update_entry(e, cfg);
  }

  // Sparse variant: updates only the named entries (auto-decoder latent
  // rows). The step counter still advances once.
  void adam_step_sparse(const AdamConfig& cfg,
                        const std::vector<std::string>& names) {
    for (const std::string& n : names)
      require(entry(n).bound,
              "adam_step_sparse: missing gradient for parameter '" + n + "'");
    ++t_;
    for (const std::string& n : names) update_entry(entry(n), cfg);
  }

 private:
  void update_entry(Entry& e, const AdamConfig& cfg) {
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(cfg.beta1, double(t_)));
    const T corr2 = static_cast<T>(1.0 - std::pow(cfg.beta2, double(t_)));
    const T lr = static_cast<T>(cfg.lr);
    const T eps = static_cast<T>(cfg.eps);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      T gi = e.grad[i];
      e.m[i] = b1 * e.m[i] + (T(1) - b1) * gi;
      e.v[i] = b2 * e.v[i] + (T(1) - b2) * gi * gi;
      T mh = e.m[i] / corr1;
      T vh = e.v[i] / corr2;
      e.value[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
    e.grad.zero();
    e.bound = false;
  }

  Entry& entry(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return entries_[it->second];
  }
  const Entry& entry(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return entries_[it->second];
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
  std::int64_t t_ = 0;
};

}  // namespace nfbench
