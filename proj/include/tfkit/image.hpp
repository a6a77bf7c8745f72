#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tfkit/common.hpp"

namespace tfkit {

// Row-major image with interleaved channels and top-left origin.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), pixels(size_t(w) * h * c, fill) {}

  bool empty() const { return pixels.empty(); }
  size_t index(int x, int y, int c = 0) const {
    return (size_t(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }

  friend bool operator==(const Image&, const Image&) = default;
};

using ImageF = Image<float>;
using ImageU8 = Image<std::uint8_t>;

// Bilinear lookup with clamp-to-edge on a 3-channel image; (u, v) in UV
// convention with v = 0 at the bottom row.
rgb sample_bilinear(const ImageF& img, const vec2& uv);
rgb pixel_rgb(const ImageF& img, int x, int y);
void set_pixel_rgb(ImageF& img, int x, int y, const rgb& c);

// 8-bit PNG. Float images are quantized with round(clamp(v, 0, 1) * 255).
ImageF read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageF& img);
void write_png(const std::filesystem::path& path, const ImageU8& img);
ImageU8 read_png_u8(const std::filesystem::path& path);

// PFM with negative scale (little-endian), rows stored bottom to top.
// Supports 1 ("Pf") and 3 ("PF") channels.
void write_pfm(const std::filesystem::path& path, const ImageF& img);
ImageF read_pfm(const std::filesystem::path& path);

ImageU8 quantize(const ImageF& img);

}  // namespace tfkit
