#pragma once

// Digit pools: the MNIST IDX binary reader (big-endian, bit-exact) and a
// procedural stand-in pool for environments without the real files. Both
// yield 28x28 grayscale glyphs in [0,1] that are down-scaled by area
// averaging to the tile size.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "nfbench/core/rng.hpp"
#include "nfbench/core/tensor.hpp"

namespace nfbench {

using Glyph = Tensor<float>;  // [side, side]

namespace idx_detail {

inline std::uint32_t read_be_u32(std::istream& is, std::size_t offset,
                                 const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    fail("idx: '" + path + "' truncated at byte offset " +
         std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace idx_detail

// IDX image file (magic 0x00000803): count x rows x cols unsigned bytes.
inline std::vector<Glyph> load_mnist_idx(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "idx: cannot open '" + path + "'");
  std::uint32_t magic = idx_detail::read_be_u32(is, 0, path);
  require(magic == 0x00000803u,
          "idx: '" + path + "' bad magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", magic);
            return std::string(buf);
          }() + " at byte offset 0 (want 0x00000803)");
  std::uint32_t count = idx_detail::read_be_u32(is, 4, path);
  std::uint32_t rows = idx_detail::read_be_u32(is, 8, path);
  std::uint32_t cols = idx_detail::read_be_u32(is, 12, path);
  require(rows > 0 && cols > 0 && rows == cols,
          "idx: '" + path + "' unsupported glyph geometry");
  std::vector<Glyph> glyphs;
  glyphs.reserve(count);
  std::vector<unsigned char> buf(std::size_t(rows) * cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!is.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size())))
      fail("idx: '" + path + "' truncated at byte offset " +
           std::to_string(16 + std::size_t(i) * buf.size()));
    Glyph g({static_cast<int>(rows), static_cast<int>(cols)});
    for (std::size_t k = 0; k < buf.size(); ++k) g[k] = buf[k] / 255.f;
    glyphs.push_back(std::move(g));
  }
  return glyphs;
}

inline void write_idx(const std::string& path, const std::vector<Glyph>& gs) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "idx: cannot open '" + path + "' for writing");
  auto be = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  int side = gs.empty() ? 28 : gs[0].rows();
  be(0x00000803u);
  be(static_cast<std::uint32_t>(gs.size()));
  be(static_cast<std::uint32_t>(side));
  be(static_cast<std::uint32_t>(side));
  for (const Glyph& g : gs)
    for (std::size_t k = 0; k < g.size(); ++k) {
      float c = g[k] < 0 ? 0.f : (g[k] > 1 ? 1.f : g[k]);
      os.put(static_cast<char>(static_cast<unsigned char>(c * 255.f + 0.5f)));
    }
}

// Box filter with fractional pixel overlap, so any source/target ratio
// averages exactly over the covered area.
inline Glyph downscale_area(const Glyph& src, int out_side) {
  require(out_side >= 1, "downscale: bad target size");
  const int in = src.rows();
  Glyph out({out_side, out_side});
  const double scale = double(in) / out_side;
  for (int oy = 0; oy < out_side; ++oy)
    for (int ox = 0; ox < out_side; ++ox) {
      double y0 = oy * scale, y1 = (oy + 1) * scale;
      double x0 = ox * scale, x1 = (ox + 1) * scale;
      double acc = 0;
      for (int iy = int(y0); iy < in && iy < y1; ++iy) {
        double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
        for (int ix = int(x0); ix < in && ix < x1; ++ix) {
          double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
          acc += wy * wx * src.at(iy, ix);
        }
      }
      out.at(oy, ox) = static_cast<float>(acc / (scale * scale));
    }
  return out;
}

namespace glyph_detail {

// 5x7 digit bitmaps
inline const char* kFont[10][7] = {
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"}};

}  // namespace glyph_detail

// Deterministic procedural pool: bitmap-font digits rendered at 28x28 with
// per-glyph jitter in position, scale and intensity. Not a substitute for
// the real dataset's variety, but enough distinct glyphs to drive the
// complexity knob of the tiled generator.
inline std::vector<Glyph> synthetic_digit_pool(int count, std::uint64_t seed) {
  require(count > 0, "synthetic pool: empty");
  std::vector<Glyph> pool;
  pool.reserve(count);
  for (int i = 0; i < count; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    int digit = static_cast<int>(rng.below(10));
    double sx = rng.uniform(2.6, 3.6);
    double sy = rng.uniform(2.6, 3.6);
    double ox = rng.uniform(1.0, 27.0 - 5 * sx);
    double oy = rng.uniform(1.0, 27.0 - 7 * sy);
    float intensity = static_cast<float>(rng.uniform(0.75, 1.0));
    Glyph g({28, 28});
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x) {
        int fy = static_cast<int>((y - oy) / sy);
        int fx = static_cast<int>((x - ox) / sx);
        if (y >= oy && x >= ox && fy >= 0 && fy < 7 && fx >= 0 && fx < 5 &&
            glyph_detail::kFont[digit][fy][fx] == '1')
          g.at(y, x) = intensity;
      }
    pool.push_back(std::move(g));
  }
  return pool;
}

}  // namespace nfbench
