#include "tfkit/bake.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace tfkit {

void BakeTarget::validate() const {
  if (mode == BakeMode::uv_texture && resolution < 16) throw InputError("bake resolution must be >= 16");
  if (dilation < 0) throw InputError("dilation must be >= 0");
}

void dilate(ImageF& texture, ImageU8& coverage, int iterations) {
  const int w = texture.width, h = texture.height, ch = texture.channels;
  for (int it = 0; it < iterations; it++) {
    ImageF src = texture;
    ImageU8 covered = coverage;
    long filled = 0;
#pragma omp parallel for schedule(static) reduction(+ : filled) num_threads(threads())
    for (int y = 0; y < h; y++)
      for (int x = 0; x < w; x++) {
        if (covered.at(x, y)) continue;
        int count = 0;
        std::vector<double> sum(ch, 0.0);
        for (int dy = -1; dy <= 1; dy++)
          for (int dx = -1; dx <= 1; dx++) {
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || !covered.at(nx, ny)) continue;
            count++;
            for (int c = 0; c < ch; c++) sum[c] += src.at(nx, ny, c);
          }
        if (count == 0) continue;
        for (int c = 0; c < ch; c++) texture.at(x, y, c) = float(sum[c] / count);
        coverage.at(x, y) = 255;
        filled++;
      }
    if (filled == 0) break;
  }
}

BakeResult bake(const TriMesh& mesh, const Predictor& predictor, const BakeTarget& target) {
  target.validate();
  BakeResult result;
  if (target.mode == BakeMode::vertex_colors) {
    result.vertex_colors.resize(mesh.positions.size());
    const long n = long(mesh.positions.size());
#pragma omp parallel for schedule(static) num_threads(threads())
    for (long i = 0; i < n; i++) result.vertex_colors[i] = predictor(mesh.positions[i]);
    return result;
  }
  if (!mesh.has_uvs()) throw InputError("uv bake requires texture coordinates");
  int res = target.resolution;
  auto cov = rasterize_uv(mesh, res, res);
  result.overlap_texels = cov.overlap_texels;
  if (cov.overlap_texels > 0)
    result.warnings.push_back("overlapping UV charts: " + std::to_string(cov.overlap_texels) +
                              " texels, last face wins");
  result.texture = ImageF(res, res, 3);
  result.coverage = ImageU8(res, res, 1);
  const long n = long(cov.face.size());
#pragma omp parallel for schedule(dynamic, 1024) num_threads(threads())
  for (long i = 0; i < n; i++) {
    if (cov.face[i] < 0) continue;
    int x = int(i % res), y = int(i / res);
    set_pixel_rgb(result.texture, x, y, predictor(mesh.interpolate(cov.face[i], cov.bary[i])));
    result.coverage.at(x, y) = 255;
  }
  dilate(result.texture, result.coverage, target.dilation);
  return result;
}

TriMesh apply_bake(const TriMesh& mesh, const BakeResult& result) {
  TriMesh out = mesh;
  if (!result.vertex_colors.empty()) {
    out.corner_uvs.clear();
    out.texture = ImageF();
    out.vertex_colors = result.vertex_colors;
  } else {
    out.vertex_colors.clear();
    out.texture = result.texture;
  }
  return out;
}

double psnr_from_mse(double mse) {
  if (!(mse > 0)) return psnr_cap;
  return std::min(psnr_cap, 10.0 * std::log10(1.0 / mse));
}

double psnr_uv(const TriMesh& mesh, const Predictor& predictor, size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("psnr_uv needs at least one sample");
  auto samples = sample_surface(mesh, n, seed);
  std::vector<double> err(n);
  const long count = long(n);
#pragma omp parallel for schedule(static) num_threads(threads())
  for (long i = 0; i < count; i++) err[i] = (predictor(samples[i].position) - samples[i].color).squaredNorm() / 3;
  double sum = 0;
  for (double e : err) sum += e;
  return psnr_from_mse(sum / double(n));
}

double psnr_image(const ImageF& a, const ImageF& b, const ImageU8& mask) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels || mask.width != a.width ||
      mask.height != a.height)
    throw InputError("psnr_image: image dimensions differ");
  double sum = 0;
  size_t count = 0;
  for (int y = 0; y < a.height; y++)
    for (int x = 0; x < a.width; x++) {
      if (!mask.at(x, y)) continue;
      for (int c = 0; c < a.channels; c++) {
        double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
        sum += d * d;
      }
      count += size_t(a.channels);
    }
  if (count == 0) throw InputError("psnr_image: empty mask");
  return psnr_from_mse(sum / double(count));
}

std::string metrics_csv(const MetricReport& r) {
  std::ostringstream out;
  out << std::setprecision(6) << std::fixed;
  out << "metric,value\n";
  out << "psnr_uv," << r.psnr_uv << "\n";
  for (size_t i = 0; i < r.psnr_image.size(); i++) out << "psnr_image_view" << i << "," << r.psnr_image[i] << "\n";
  if (!r.psnr_image.empty()) out << "psnr_image_mean," << r.psnr_image_mean << "\n";
  out << "sample_count," << r.sample_count << "\n";
  return out.str();
}

std::string metrics_text(const MetricReport& r) {
  std::ostringstream out;
  out << std::setprecision(3) << std::fixed;
  out << "PSNR_uv     " << r.psnr_uv << " dB over " << r.sample_count << " surface samples\n";
  for (size_t i = 0; i < r.psnr_image.size(); i++) out << "PSNR view " << i << " " << r.psnr_image[i] << " dB\n";
  if (!r.psnr_image.empty()) out << "PSNR mean   " << r.psnr_image_mean << " dB\n";
  if (!r.notes.empty()) out << r.notes << "\n";
  return out.str();
}

Predictor tf_predictor(const Bvh& bvh, const TriMesh& mesh, float tau, const vec3f& background) {
  return [&bvh, &mesh, tau, background](const vec3& x) -> rgb {
    auto hit = closest_point(bvh, mesh, x);
    if (float(hit.distance) > tau) return background.cast<double>();
    return surface_color(mesh, hit.face_id, hit.bary);
  };
}

Predictor field_predictor(const TriplaneCubeField& field) {
  return [&field](const vec3& x) -> rgb { return decode(field, x); };
}

Predictor blended_predictor(const PartialTexture& partial, const PartialLookup& lookup, Predictor predictor,
                            const BlendOptions& opt) {
  return [&partial, &lookup, predictor = std::move(predictor), opt](const vec3& x) -> rgb {
    int i = lookup.nearest(x);
    if (i < 0) return predictor(x);
    double a = blend_alpha(partial.weights[i], partial.valid[i], opt);
    if (a == 1) return partial.colors[i];
    if (a == 0) return predictor(x);
    return a * partial.colors[i] + (1 - a) * predictor(x);
  };
}

void blend_texture(ImageF& texture, const ImageF& partial_color, const ImageF& partial_weight, double w_min,
                   const BlendOptions& opt) {
  if (partial_color.width != texture.width || partial_color.height != texture.height ||
      partial_weight.width != texture.width || partial_weight.height != texture.height)
    throw InputError("partial texture is " + std::to_string(partial_color.width) + "x" +
                     std::to_string(partial_color.height) + ", bake target is " + std::to_string(texture.width) +
                     "x" + std::to_string(texture.height));
  for (int y = 0; y < texture.height; y++)
    for (int x = 0; x < texture.width; x++) {
      double w = partial_weight.at(x, y);
      double a = blend_alpha(w, w >= w_min, opt);
      if (a == 0) continue;
      rgb c = a == 1 ? pixel_rgb(partial_color, x, y)
                     : rgb(a * pixel_rgb(partial_color, x, y) + (1 - a) * pixel_rgb(texture, x, y));
      set_pixel_rgb(texture, x, y, c);
    }
}

}  // namespace tfkit
