#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "tfkit/common.hpp"
#include "tfkit/image.hpp"

namespace tfkit {

enum class ColorSource { texture, vertex_colors };

// Indexed triangle mesh carrying exactly one color source: per-corner UVs
// with a texture image, or per-vertex colors.
struct TriMesh {
  std::vector<vec3> positions;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<vec2, 3>> corner_uvs;  // one entry per face, or empty
  std::vector<rgb> vertex_colors;                // one entry per vertex, or empty
  ImageF texture;                                // RGB, used with corner_uvs

  ColorSource color_source() const;
  bool has_uvs() const { return !corner_uvs.empty(); }
  size_t num_faces() const { return faces.size(); }

  const vec3& vertex(int face, int corner) const { return positions[faces[face][corner]]; }
  vec3 face_normal(int face) const;  // unit; zero for degenerate faces
  double face_area(int face) const;
  vec3 interpolate(int face, const vec3& bary) const;
};

// Throws InputError describing the first violated invariant.
void validate_mesh(const TriMesh& mesh);

// y = scale * x + translation
struct Similarity {
  double scale = 1;
  vec3 translation = vec3::Zero();

  vec3 apply(const vec3& p) const { return scale * p + translation; }
  vec3 invert(const vec3& p) const { return (p - translation) / scale; }
};

struct Bounds3 {
  vec3 min = vec3::Constant(std::numeric_limits<double>::infinity());
  vec3 max = vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void expand(const Bounds3& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  vec3 center() const { return (min + max) / 2; }
  vec3 extent() const { return max - min; }
};

Bounds3 mesh_bounds(const TriMesh& mesh);

constexpr double default_margin = 0.01;

// Centers the bounding box at the origin and scales uniformly so the longest
// axis spans [-(1 - margin), 1 - margin].
std::pair<TriMesh, Similarity> normalize_unit(const TriMesh& mesh, double margin = default_margin);

struct SurfaceSample {
  vec3 position;
  int face_id = -1;
  vec3 bary;
  vec3 normal;
  rgb color;
};

// Area-weighted surface samples, uniform within each triangle.
std::vector<SurfaceSample> sample_surface(const TriMesh& mesh, size_t count, std::uint64_t seed);

rgb surface_color(const TriMesh& mesh, int face, const vec3& bary);

// Wavefront OBJ with optional MTL map_Kd texture or `v x y z r g b` colors.
TriMesh load_mesh(const std::filesystem::path& path);

// Writes OBJ (+ MTL and PNG texture when the mesh is textured).
void save_mesh(const std::filesystem::path& path, const TriMesh& mesh);

// Binary little-endian PLY triangle mesh with per-vertex uchar colors.
void write_ply(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<rgb>& vertex_colors);

}  // namespace tfkit
