#pragma once

// Differentiable image formation: hierarchical volume rendering for the 3D
// task and direct light-field evaluation for the 4D task. Fields are
// closures so trained decoders and analytic test scenes share one renderer.

#include <cstdint>
#include <functional>
#include <vector>

#include "nfbench/conditioning/latent_table.hpp"
#include "nfbench/core/graph.hpp"
#include "nfbench/decoders/decoder.hpp"
#include "nfbench/encoding/camera.hpp"
#include "nfbench/encoding/posenc.hpp"
#include "nfbench/render/sampling.hpp"

namespace nfbench {

struct SceneBounds {
  Vec3 lo{-1, -1, -1};
  Vec3 hi{1, 1, 1};

  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
};

template <typename T>
struct FieldVars {
  Var<T> color;  // [n, 3]
  Var<T> sigma;  // [n, 1], non-negative
};

// Evaluates radiance and density at world positions [n,3].
template <typename T>
using RadianceField =
    std::function<FieldVars<T>(Graph<T>&, const Tensor<T>& positions)>;

// Maps Plucker ray coordinates [n,6] to color [n,3].
template <typename T>
using LightField =
    std::function<Var<T>(Graph<T>&, const Tensor<T>& plucker)>;

// ---------------------------------------------------------------------------
// hierarchical NeRF rendering
//
// Coarse stratified pass -> compositing weights (taken on values only, so
// the PDF is detached) -> importance samples merged with the coarse depths
// -> one field evaluation and a single composite over the merged set. The
// same field serves both passes. Per-ray rng streams are derived from
// (seed, stream_base + ray index) so parallel or resumed runs reproduce.

template <typename T>
Var<T> render_nerf_rays(Graph<T>& g, const RadianceField<T>& field,
                        const std::vector<Ray>& rays, const SampleSpec& spec,
                        const std::array<T, 3>& background, std::uint64_t seed,
                        std::uint64_t ray_stream_base) {
  spec.validate();
  const int R = static_cast<int>(rays.size());
  require(R > 0, "render_nerf_rays: no rays");
  const int Sc = spec.coarse;

  std::vector<std::vector<double>> coarse(R);
  Tensor<T> coarse_pos({R * Sc, 3});
  for (int r = 0; r < R; ++r) {
    CounterRng rng(seed, 2 * (ray_stream_base + r));
    coarse[r] = stratified_samples(spec, rng);
    for (int i = 0; i < Sc; ++i) {
      Vec3 p = rays[r].origin + rays[r].direction * coarse[r][i];
      coarse_pos[(static_cast<std::size_t>(r) * Sc + i) * 3 + 0] = T(p.x);
      coarse_pos[(static_cast<std::size_t>(r) * Sc + i) * 3 + 1] = T(p.y);
      coarse_pos[(static_cast<std::size_t>(r) * Sc + i) * 3 + 2] = T(p.z);
    }
  }

  int S = Sc + spec.fine;
  std::vector<std::vector<double>> merged(R);
  if (spec.fine > 0) {
    FieldVars<T> coarse_eval = field(g, coarse_pos);
    Tensor<T> sigma({R, Sc});
    const T* sv = g.vals(coarse_eval.sigma.id);
    for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = sv[i];
    Tensor<T> delta({R, Sc});
    for (int r = 0; r < R; ++r) {
      auto d = deltas_from_depths(coarse[r], spec.far);
      for (int i = 0; i < Sc; ++i) delta.at(r, i) = T(d[i]);
    }
    Tensor<T> weights;
    std::vector<T> trans;
    composite_weights(sigma, delta, weights, trans);
    for (int r = 0; r < R; ++r) {
      std::vector<double> w(Sc);
      for (int i = 0; i < Sc; ++i) w[i] = double(weights.at(r, i));
      CounterRng rng(seed, 2 * (ray_stream_base + r) + 1);
      merged[r] = importance_samples(w, coarse[r], spec.fine, rng);
    }
  } else {
    merged = coarse;
  }

  Tensor<T> pos({R * S, 3});
  Tensor<T> delta({R, S});
  for (int r = 0; r < R; ++r) {
    auto d = deltas_from_depths(merged[r], spec.far);
    for (int i = 0; i < S; ++i) {
      delta.at(r, i) = T(d[i]);
      Vec3 p = rays[r].origin + rays[r].direction * merged[r][i];
      pos[(static_cast<std::size_t>(r) * S + i) * 3 + 0] = T(p.x);
      pos[(static_cast<std::size_t>(r) * S + i) * 3 + 1] = T(p.y);
      pos[(static_cast<std::size_t>(r) * S + i) * 3 + 2] = T(p.z);
    }
  }
  FieldVars<T> eval = field(g, pos);
  Var<T> color = reshape(eval.color, {R, S, 3});
  Var<T> sigma = reshape(eval.sigma, {R, S});
  return composite(sigma, color, delta, background);
}

template <typename T>
Var<T> render_nerf_ray(Graph<T>& g, const RadianceField<T>& field,
                       const Ray& ray, const SampleSpec& spec,
                       const std::array<T, 3>& background, std::uint64_t seed,
                       std::uint64_t ray_stream) {
  return render_nerf_rays(g, field, std::vector<Ray>{ray}, spec, background,
                          seed, ray_stream);
}

// ---------------------------------------------------------------------------
// light fields: one field evaluation per ray, after checking that every
// origin lies outside the scene bounds (Plucker coordinates cannot tell
// co-linear rays apart, so origins inside the scene are rejected).

template <typename T>
Var<T> render_lightfield_rays(Graph<T>& g, const LightField<T>& field,
                              const std::vector<Ray>& rays,
                              const SceneBounds& bounds) {
  require(!rays.empty(), "render_lightfield_rays: no rays");
  Tensor<T> plucker({static_cast<int>(rays.size()), 6});
  for (std::size_t r = 0; r < rays.size(); ++r) {
    require(!bounds.contains(rays[r].origin),
            "render_lightfield_rays: ray origin inside scene bounds");
    auto p = plucker_from_ray(rays[r]);
    for (int k = 0; k < 6; ++k) plucker.at(static_cast<int>(r), k) = T(p[k]);
  }
  return field(g, plucker);
}

// ---------------------------------------------------------------------------
// decoder-backed fields

template <typename T>
using LatentProvider = std::function<LatentInput<T>(Graph<T>&)>;

// Positions are normalized into [-1,1]^3 against the bounds before the
// sinusoidal encoding; the decoder must be a radiance-field decoder.
template <typename T>
RadianceField<T> decoder_radiance_field(const Decoder<T>& dec,
                                        ParamStore<T>& store, bool frozen,
                                        LatentProvider<T> latent,
                                        const SceneBounds& bounds,
                                        PosEncConfig pe) {
  require(dec.config().output == OutputKind::kRgbSigma,
          "decoder_radiance_field: decoder does not emit (color, density)");
  return [&dec, &store, frozen, latent = std::move(latent), bounds,
          pe](Graph<T>& g, const Tensor<T>& positions) -> FieldVars<T> {
    const int n = positions.rows();
    Tensor<T> norm({n, 3});
    const double ext[3] = {bounds.hi.x - bounds.lo.x, bounds.hi.y - bounds.lo.y,
                           bounds.hi.z - bounds.lo.z};
    const double lo[3] = {bounds.lo.x, bounds.lo.y, bounds.lo.z};
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < 3; ++c)
        norm.at(r, c) =
            T(2) * (positions.at(r, c) - T(lo[c])) / T(ext[c]) - T(1);
    ParamBinder<T> p{g, store, frozen};
    Var<T> out =
        dec.forward(p, g.constant(positional_encode(norm, pe)), latent(g));
    return {slice(out, 1, 0, 3), slice(out, 1, 3, 1)};
  };
}

// Plucker 6-vectors encoded after scaling the moment part into [-1,1] by
// the scene's bounding radius.
template <typename T>
LightField<T> decoder_light_field(const Decoder<T>& dec, ParamStore<T>& store,
                                  bool frozen, LatentProvider<T> latent,
                                  double moment_scale, PosEncConfig pe) {
  require(dec.config().output == OutputKind::kRgb,
          "decoder_light_field: decoder must emit color only");
  require(moment_scale > 0, "decoder_light_field: bad moment scale");
  return [&dec, &store, frozen, latent = std::move(latent), moment_scale,
          pe](Graph<T>& g, const Tensor<T>& plucker) -> Var<T> {
    Tensor<T> norm = plucker;
    for (int r = 0; r < norm.rows(); ++r)
      for (int c = 3; c < 6; ++c)
        norm.at(r, c) = T(norm.at(r, c) / moment_scale);
    ParamBinder<T> p{g, store, frozen};
    return dec.forward(p, g.constant(positional_encode(norm, pe)), latent(g));
  };
}

}  // namespace nfbench
