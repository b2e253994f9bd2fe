#pragma once

// Synthetic multiview scenes with analytic density fields: smooth Gaussian
// blobs whose exact radiance/density are known at every point, so rendering
// oracles have a closed-form answer. Ground-truth views come from a plain
// double-precision midpoint-quadrature tracer, bit-reproducible from
// (scene, camera).

#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

#include "nfbench/core/rng.hpp"
#include "nfbench/data/image.hpp"
#include "nfbench/encoding/camera.hpp"
#include "nfbench/render/renderer.hpp"

namespace nfbench {

struct GaussianBlob {
  Vec3 center;
  double radius = 0.3;
  double amplitude = 8.0;            // peak density
  std::array<double, 3> albedo{1, 1, 1};
};

struct BlobScene {
  std::vector<GaussianBlob> blobs;
  SceneBounds bounds{{-1, -1, -1}, {1, 1, 1}};
  double near = 1.0, far = 5.0;
  std::array<double, 3> background{0, 0, 0};

  void eval(const Vec3& p, std::array<double, 3>& color, double& sigma) const {
    sigma = 0;
    color = {0, 0, 0};
    for (const GaussianBlob& b : blobs) {
      Vec3 d = p - b.center;
      double s = b.amplitude * std::exp(-d.dot(d) / (2 * b.radius * b.radius));
      sigma += s;
      for (int c = 0; c < 3; ++c) color[c] += s * b.albedo[c];
    }
    if (sigma > 1e-12)
      for (int c = 0; c < 3; ++c) color[c] /= sigma;
  }
};

inline BlobScene make_blob_scene(std::uint64_t seed, int instance,
                                 int blob_count = 3) {
  CounterRng rng(seed, 0x5ce7e000u + static_cast<std::uint64_t>(instance));
  BlobScene scene;
  for (int i = 0; i < blob_count; ++i) {
    GaussianBlob b;
    b.center = {rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45),
                rng.uniform(-0.45, 0.45)};
    b.radius = rng.uniform(0.15, 0.35);
    b.amplitude = rng.uniform(4.0, 12.0);
    b.albedo = {rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0),
                rng.uniform(0.2, 1.0)};
    scene.blobs.push_back(b);
  }
  return scene;
}

// Deterministic midpoint quadrature along each pixel ray; `samples` high
// enough makes this the brute-force oracle for the hierarchical renderer.
inline Image reference_render(const BlobScene& scene, const Camera& cam,
                              int samples) {
  Image img(cam.width, cam.height);
  const double h = (scene.far - scene.near) / samples;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      Ray ray = ray_from_pixel(cam, x + 0.5, y + 0.5);
      double trans = 1.0;
      std::array<double, 3> acc{0, 0, 0};
      for (int i = 0; i < samples; ++i) {
        double t = scene.near + (i + 0.5) * h;
        Vec3 p = ray.origin + ray.direction * t;
        std::array<double, 3> col;
        double sigma;
        scene.eval(p, col, sigma);
        double alpha = 1.0 - std::exp(-sigma * h);
        for (int c = 0; c < 3; ++c) acc[c] += trans * alpha * col[c];
        trans *= 1.0 - alpha;
      }
      float* px = img.pixel(x, y);
      for (int c = 0; c < 3; ++c)
        px[c] = static_cast<float>(acc[c] + trans * scene.background[c]);
    }
  return img;
}

// Disjoint, exhaustive train/test view split: a seeded shuffle with
// floor(fraction * count) views held out.
inline std::pair<std::vector<int>, std::vector<int>> holdout_split(
    int count, double fraction, std::uint64_t seed) {
  std::vector<int> ids(count);
  std::iota(ids.begin(), ids.end(), 0);
  CounterRng rng(seed, 0x601d0c7ULL);
  for (int i = count - 1; i > 0; --i)
    std::swap(ids[i], ids[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  int test_count = static_cast<int>(fraction * count);
  std::vector<int> test(ids.begin(), ids.begin() + test_count);
  std::vector<int> train(ids.begin() + test_count, ids.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

struct MultiviewSet {
  BlobScene scene;
  std::vector<Camera> cameras;
  std::vector<Image> images;
  std::vector<int> train_views, test_views;
};

// Cameras on a ring around the origin, ground truth from the reference
// tracer, 10% of views held out.
inline MultiviewSet generate_multiview(const BlobScene& scene, int views,
                                       int resolution, std::uint64_t seed,
                                       double ring_radius = 3.0,
                                       double elevation = 0.35,
                                       int gt_samples = 512) {
  require(views >= 1, "generate_multiview: need at least one view");
  MultiviewSet set;
  set.scene = scene;
  const double focal = 1.2 * resolution;
  for (int v = 0; v < views; ++v) {
    double az = 2.0 * 3.14159265358979323846 * v / views;
    Vec3 eye{ring_radius * std::cos(az) * std::cos(elevation),
             ring_radius * std::sin(elevation),
             ring_radius * std::sin(az) * std::cos(elevation)};
    Camera cam = look_at_camera(eye, {0, 0, 0}, focal, resolution, resolution);
    set.cameras.push_back(cam);
    set.images.push_back(reference_render(scene, cam, gt_samples));
  }
  std::tie(set.train_views, set.test_views) = holdout_split(views, 0.1, seed);
  return set;
}

}  // namespace nfbench
