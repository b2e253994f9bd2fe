#pragma once

// Tiled digit images with a controllable complexity knob: a grid of
// down-scaled digits where `unique` controls how many distinct digits
// appear per image, repeated over contiguous square blocks of cells.
// Images are pure functions of (seed, index) -- an infinite stream, no
// storage.

#include <cmath>
#include <cstdint>
#include <vector>

#include "nfbench/core/rng.hpp"
#include "nfbench/data/image.hpp"
#include "nfbench/data/mnist.hpp"

namespace nfbench {

struct TiledMnistSpec {
  int grid = 16;       // cells per side
  int glyph = 16;      // pixels per cell side
  int unique = 16;     // distinct digits per image (perfect square)
  std::uint64_t seed = 0;

  int blocks_per_side() const {
    int s = static_cast<int>(std::lround(std::sqrt(double(unique))));
    require(s * s == unique,
            "tiled mnist: unique=" + std::to_string(unique) +
                " is not a perfect square");
    require(grid % s == 0, "tiled mnist: grid " + std::to_string(grid) +
                               " not divisible into " + std::to_string(s) +
                               " blocks per side");
    return s;
  }

  int image_size() const { return grid * glyph; }
};

class TiledMnist {
 public:
  TiledMnist(TiledMnistSpec spec, const std::vector<Glyph>& pool)
      : spec_(spec) {
    require(!pool.empty(), "tiled mnist: empty digit pool");
    (void)spec_.blocks_per_side();
    glyphs_.reserve(pool.size());
    for (const Glyph& g : pool) glyphs_.push_back(downscale_area(g, spec_.glyph));
  }

  const TiledMnistSpec& spec() const { return spec_; }
  std::size_t pool_size() const { return glyphs_.size(); }

  // digit ids for one image, one per block, raster order
  std::vector<int> block_ids(std::uint64_t index) const {
    CounterRng rng(spec_.seed, index);
    std::vector<int> ids(spec_.unique);
    for (int& id : ids) id = static_cast<int>(rng.below(glyphs_.size()));
    return ids;
  }

  Image image(std::uint64_t index) const {
    std::vector<int> ids = block_ids(index);
    const int bs = spec_.blocks_per_side();
    const int cells_per_block = spec_.grid / bs;
    Image img(spec_.image_size(), spec_.image_size());
    for (int cy = 0; cy < spec_.grid; ++cy)
      for (int cx = 0; cx < spec_.grid; ++cx) {
        int block = (cy / cells_per_block) * bs + (cx / cells_per_block);
        const Glyph& g = glyphs_[ids[block]];
        for (int y = 0; y < spec_.glyph; ++y)
          for (int x = 0; x < spec_.glyph; ++x) {
            float v = g.at(y, x);
            float* px = img.pixel(cx * spec_.glyph + x, cy * spec_.glyph + y);
            px[0] = px[1] = px[2] = v;
          }
      }
    return img;
  }

 private:
  TiledMnistSpec spec_;
  std::vector<Glyph> glyphs_;  // pre-scaled to cell size
};

}  // namespace nfbench
