#pragma once

// Float RGB images in [0,1] plus portable-pixmap I/O. Written pixels are
// linear values clamped to [0,1] and quantized to 8 bits; no gamma is
// applied in either direction.

#include <fstream>
#include <string>
#include <vector>

#include "nfbench/core/tensor.hpp"

namespace nfbench {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;  // row-major, 3 floats per pixel

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(std::size_t(w) * h * 3, 0.f) {}

  std::size_t pixels() const { return std::size_t(width) * height; }
  float* pixel(int x, int y) { return rgb.data() + (std::size_t(y) * width + x) * 3; }
  const float* pixel(int x, int y) const {
    return rgb.data() + (std::size_t(y) * width + x) * 3;
  }

  // [H*W, 3] rows in raster order
  template <typename T>
  Tensor<T> as_tensor() const {
    Tensor<T> t({static_cast<int>(pixels()), 3});
    for (std::size_t i = 0; i < rgb.size(); ++i) t[i] = static_cast<T>(rgb[i]);
    return t;
  }

  template <typename T>
  static Image from_tensor(const Tensor<T>& t, int width, int height) {
    require(t.size() == std::size_t(width) * height * 3,
            "image: tensor size does not match resolution");
    Image img(width, height);
    for (std::size_t i = 0; i < img.rgb.size(); ++i)
      img.rgb[i] = static_cast<float>(t[i]);
    return img;
  }
};

inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open '" + path + "' for writing");
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(img.rgb.size());
  for (float v : img.rgb) {
    float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    bytes.push_back(static_cast<unsigned char>(c * 255.f + 0.5f));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

inline Image read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open image '" + path + "'");
  std::string magic;
  is >> magic;
  require(magic == "P6" || magic == "P5", "'" + path + "': not a P5/P6 pixmap");
  int w = 0, h = 0, maxval = 0;
  is >> w >> h >> maxval;
  require(w > 0 && h > 0 && maxval == 255, "'" + path + "': bad pixmap header");
  is.get();  // single whitespace after header
  int ch = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> bytes(std::size_t(w) * h * ch);
  require(bool(is.read(reinterpret_cast<char*>(bytes.data()),
                       static_cast<std::streamsize>(bytes.size()))),
          "'" + path + "': truncated pixel data");
  Image img(w, h);
  for (std::size_t p = 0; p < img.pixels(); ++p)
    for (int c = 0; c < 3; ++c)
      img.rgb[p * 3 + c] = bytes[p * ch + (ch == 3 ? c : 0)] / 255.f;
  return img;
}

}  // namespace nfbench
