#include "tfkit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binio.hpp"

namespace tfkit {

rgb pixel_rgb(const ImageF& img, int x, int y) {
  const float* p = &img.pixels[img.index(x, y)];
  return {p[0], p[1], p[2]};
}

void set_pixel_rgb(ImageF& img, int x, int y, const rgb& c) {
  float* p = &img.pixels[img.index(x, y)];
  p[0] = float(c.x());
  p[1] = float(c.y());
  p[2] = float(c.z());
}

rgb sample_bilinear(const ImageF& img, const vec2& uv) {
  // texel centers sit at (i + 0.5) / width
  double fx = uv.x() * img.width - 0.5;
  double fy = (1.0 - uv.y()) * img.height - 0.5;
  fx = std::clamp(fx, 0.0, double(img.width - 1));
  fy = std::clamp(fy, 0.0, double(img.height - 1));
  int x0 = std::min(int(fx), img.width - 1);
  int y0 = std::min(int(fy), img.height - 1);
  int x1 = std::min(x0 + 1, img.width - 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  double tx = fx - x0, ty = fy - y0;
  rgb c00 = pixel_rgb(img, x0, y0), c10 = pixel_rgb(img, x1, y0);
  rgb c01 = pixel_rgb(img, x0, y1), c11 = pixel_rgb(img, x1, y1);
  return (c00 * (1 - tx) + c10 * tx) * (1 - ty) + (c01 * (1 - tx) + c11 * tx) * ty;
}

ImageU8 quantize(const ImageF& img) {
  ImageU8 out(img.width, img.height, img.channels);
  for (size_t i = 0; i < img.pixels.size(); i++) {
    float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
    out.pixels[i] = std::uint8_t(std::lround(v * 255.0f));
  }
  return out;
}

namespace {

png_uint_32 png_format(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw InputError("png: unsupported channel count " + std::to_string(channels));
  }
}

}  // namespace

ImageU8 read_png_u8(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw InputError("cannot read png " + path.string() + ": " + image.message);
  int channels = (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  ImageU8 out(int(image.width), int(image.height), channels);
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw InputError("cannot decode png " + path.string() + ": " + msg);
  }
  return out;
}

ImageF read_png(const std::filesystem::path& path) {
  auto u8 = read_png_u8(path);
  ImageF out(u8.width, u8.height, u8.channels);
  for (size_t i = 0; i < u8.pixels.size(); i++) out.pixels[i] = u8.pixels[i] / 255.0f;
  return out;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(img.width);
  image.height = png_uint_32(img.height);
  image.format = png_format(img.channels);
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr))
    throw InputError("cannot write png " + path.string() + ": " + image.message);
}

void write_png(const std::filesystem::path& path, const ImageF& img) {
  write_png(path, quantize(img));
}

void write_pfm(const std::filesystem::path& path, const ImageF& img) {
  if (img.channels != 1 && img.channels != 3)
    throw InputError("pfm: unsupported channel count " + std::to_string(img.channels));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write pfm " + path.string());
  out << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n-1.0\n";
  for (int y = img.height - 1; y >= 0; y--)
    for (int x = 0; x < img.width; x++)
      for (int c = 0; c < img.channels; c++) binio::put(out, img.at(x, y, c));
  if (!out) throw InputError("cannot write pfm " + path.string());
}

ImageF read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read pfm " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || !in)
    throw InputError("bad pfm header in " + path.string());
  if (scale > 0) throw InputError("big-endian pfm not supported: " + path.string());
  int channels = magic == "PF" ? 3 : 1;
  ImageF img(w, h, channels);
  for (int y = h - 1; y >= 0; y--)
    for (int x = 0; x < w; x++)
      for (int c = 0; c < channels; c++) img.at(x, y, c) = binio::get<float>(in, "pfm pixels");
  return img;
}

}  // namespace tfkit
