#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tfkit/field.hpp"
#include "tfkit/raster.hpp"
#include "tfkit/texfunc.hpp"
#include "tfkit/reproject.hpp"

namespace tfkit {

enum class BakeMode { uv_texture, vertex_colors };

struct BakeTarget {
  BakeMode mode = BakeMode::uv_texture;
  int resolution = 1024;
  int dilation = 2;

  void validate() const;
};

struct BakeResult {
  ImageF texture;           // uv mode
  ImageU8 coverage;         // uv mode: 255 on texels covered by a face
  size_t overlap_texels = 0;
  std::vector<rgb> vertex_colors;  // vertex mode
  std::vector<std::string> warnings;
};

BakeResult bake(const TriMesh& mesh, const Predictor& predictor, const BakeTarget& target);

// Fills uncovered texels adjacent (8-neighborhood) to covered ones with the
// mean of their covered neighbors, `iterations` times. Updates coverage.
void dilate(ImageF& texture, ImageU8& coverage, int iterations);

// Mesh with the baked result as its color source.
TriMesh apply_bake(const TriMesh& mesh, const BakeResult& result);

constexpr double psnr_cap = 99.0;

// 10 log10(1 / mse), capped at psnr_cap.
double psnr_from_mse(double mse);

// PSNR between predictor and ground-truth surface colors over area-weighted
// surface samples; mse averages over the three channels.
double psnr_uv(const TriMesh& mesh, const Predictor& predictor, size_t samples, std::uint64_t seed);

// PSNR over pixels where mask != 0.
double psnr_image(const ImageF& a, const ImageF& b, const ImageU8& mask);

struct MetricReport {
  double psnr_uv = 0;
  std::vector<double> psnr_image;
  double psnr_image_mean = 0;
  size_t sample_count = 0;
  std::string notes;
};

std::string metrics_csv(const MetricReport& report);
std::string metrics_text(const MetricReport& report);

// Ground-truth texture function of a mesh as a predictor.
Predictor tf_predictor(const Bvh& bvh, const TriMesh& mesh, float tau = default_tau,
                       const vec3f& background = default_background);

Predictor field_predictor(const TriplaneCubeField& field);

// Blends against the nearest partial element within the lookup radius;
// falls back to `predictor` where there is none.
Predictor blended_predictor(const PartialTexture& partial, const PartialLookup& lookup, Predictor predictor,
                            const BlendOptions& opt);

// Texel-wise blend of a baked texture with a partial color/weight image pair
// of the same size. Texels with weight below w_min keep the baked color.
void blend_texture(ImageF& texture, const ImageF& partial_color, const ImageF& partial_weight, double w_min,
                   const BlendOptions& opt);

}  // namespace tfkit
