#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "tfkit/raster.hpp"
#include "tfkit/spatial.hpp"

namespace tfkit {

struct View {
  OrthoCamera camera;
  ImageF color;
  ImageF depth;
  ImageU8 mask;
};

using ViewSet = std::vector<View>;

// Loads rig.txt plus per-view color, depth and mask images written by the
// render command.
ViewSet read_views(const std::filesystem::path& dir);

struct ReprojectOptions {
  double eps_z = 1e-3;
  double power = 4;
  double w_min = 0.05;
};

enum class PartialDomain { samples, uv_texels };

// Per-element reprojected color and accumulated view confidence. In texel
// mode, element i is texel texel_index[i] of a uv_width x uv_height grid.
struct PartialTexture {
  PartialDomain domain = PartialDomain::samples;
  int uv_width = 0;
  int uv_height = 0;
  std::vector<int> texel_index;
  std::vector<vec3> positions;
  std::vector<vec3> normals;
  std::vector<rgb> colors;
  std::vector<double> weights;
  std::vector<bool> valid;
  double w_min = 0.05;

  size_t size() const { return positions.size(); }
  double valid_fraction() const;
};

struct ReprojectTarget {
  vec3 position;
  vec3 normal;
};

std::vector<ReprojectTarget> sample_targets(const std::vector<SurfaceSample>& samples);

// Contribution of one view to one target; returns false if the view does not
// see the point. Weight is max(0, -n.d)^p.
bool view_contribution(const View& view, const vec3& position, const vec3& normal, const ReprojectOptions& opt,
                       rgb& color, double& weight);

PartialTexture reproject(const ViewSet& views, const std::vector<ReprojectTarget>& targets,
                         const ReprojectOptions& opt = {});

// Texel targets: every covered texel of the mesh UV layout.
PartialTexture reproject_uv(const TriMesh& mesh, const ViewSet& views, int width, int height,
                            const ReprojectOptions& opt = {});

using Predictor = std::function<rgb(const vec3&)>;

struct BlendOptions {
  double w_sat = 1.0;
  double k = 1.0;
};

double blend_alpha(double weight, bool valid, const BlendOptions& opt);

// alpha * partial + (1 - alpha) * predictor with alpha = clamp(w / w_sat)^k,
// alpha = 0 for invalid elements.
std::vector<rgb> blend(const PartialTexture& partial, const Predictor& predictor, const BlendOptions& opt = {});

// Colored point cloud with a float `weight` property, binary little-endian.
void write_partial_ply(const std::filesystem::path& path, const PartialTexture& partial);
PartialTexture read_partial_ply(const std::filesystem::path& path, double w_min);

// PNG color plus a single-channel PFM of weights, texel mode only.
void write_partial_texture(const std::filesystem::path& png, const std::filesystem::path& weight_pfm,
                           const PartialTexture& partial);

// Nearest-point lookup into a sample-domain partial texture.
class PartialLookup {
 public:
  PartialLookup(const PartialTexture& partial, double radius);
  // Index of the nearest element within radius, or -1.
  int nearest(const vec3& p) const;

 private:
  const PartialTexture* partial_;
  double radius_;
  double cell_;
  std::vector<std::pair<std::uint64_t, int>> cells_;  // sorted (cell key, element)
  std::uint64_t key(long x, long y, long z) const;
};

}  // namespace tfkit
