#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tfkit/mesh.hpp"

namespace tfkit {

// Orthographic camera. The image x axis follows right() = view_dir x up and
// the image y axis points down (-up). Pixel (i, j) has its center at
// (i + 0.5, j + 0.5); the world origin projects to (width / 2, height / 2).
// Depth is measured along view_dir from an eye placed at
// -camera_eye_distance * view_dir.
struct OrthoCamera {
  vec3 view_dir = {0, 0, -1};
  vec3 up = {0, 1, 0};
  double half_extent = 1;  // world units from image center to left/right edge
  int width = 512;
  int height = 512;
  double near = 0;
  double far = 4;

  vec3 right() const { return view_dir.cross(up); }
  double texel_size() const { return 2 * half_extent / width; }
  void validate() const;

  friend bool operator==(const OrthoCamera&, const OrthoCamera&) = default;
};

constexpr double camera_eye_distance = 2.0;

struct Projection {
  vec2 pixel;
  double depth;
};

Projection project(const OrthoCamera& camera, const vec3& p);
vec3 unproject(const OrthoCamera& camera, const vec2& pixel, double depth);

// View directions -X, +X, -Y, +Y, -Z, +Z. Up is +Y for the four horizontal
// views, +Z when looking along -Y and -Z when looking along +Y.
std::vector<OrthoCamera> six_views(int resolution, double half_extent = 1.0);

enum RenderModes : unsigned {
  render_color = 1u << 0,
  render_normal = 1u << 1,
  render_ccm = 1u << 2,
  render_depth = 1u << 3,
  render_mask = 1u << 4,
  render_all = 31u,
};

unsigned parse_render_modes(const std::string& list);

// Unrequested images stay empty. Depth is +inf where mask is 0. Normals are
// flipped to face the camera and encoded (n + 1) / 2; CCM encodes (p + 1) / 2.
struct RenderOutput {
  ImageF color;
  ImageF normal;
  ImageF ccm;
  ImageF depth;
  ImageU8 mask;
  std::vector<int> face_id;  // -1 where uncovered
};

// Tiled rasterizer, tiles rendered in parallel.
RenderOutput render(const TriMesh& mesh, const OrthoCamera& camera, unsigned modes = render_all);

// Per-pixel loop over every triangle; reference for render().
RenderOutput render_reference(const TriMesh& mesh, const OrthoCamera& camera, unsigned modes = render_all);

inline vec3 encode_unit(const vec3& v) { return (v.array() + 1.0) / 2.0; }
inline vec3 decode_unit(const vec3& e) { return 2.0 * e.array() - 1.0; }

// Texel coverage of the mesh's UV charts. Texel (i, j) samples the UV point
// ((i + 0.5) / width, 1 - (j + 0.5) / height); when charts overlap the
// last face wins.
struct UvCoverage {
  int width = 0;
  int height = 0;
  std::vector<int> face;  // -1 where uncovered
  std::vector<vec3> bary;
  size_t overlap_texels = 0;
};

UvCoverage rasterize_uv(const TriMesh& mesh, int width, int height);

// Camera rig as key=value text: views, view<i>.dir, .up, .half_extent,
// .resolution, .near, .far.
void write_rig(const std::filesystem::path& path, const std::vector<OrthoCamera>& cameras);
std::vector<OrthoCamera> read_rig(const std::filesystem::path& path);

std::filesystem::path view_image_path(const std::filesystem::path& dir, size_t view, const std::string& kind);

// Writes color/mask as PNG and normal/ccm/depth as PFM for the requested modes.
void write_render(const std::filesystem::path& dir, size_t view, const RenderOutput& out, unsigned modes,
                  bool png_attributes = false);

}  // namespace tfkit
