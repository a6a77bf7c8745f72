#pragma once

// Procedural fixture meshes used by tests, benchmarks and the acceptance
// suite.

#include <functional>

#include "tfkit/mesh.hpp"

namespace tfkit::shapes {

using ColorFn = std::function<rgb(const vec3&)>;

// Smooth low-frequency color field used to paint fixtures.
rgb smooth_colors(const vec3& p);

// Latitude-longitude sphere textured through an equirectangular image whose
// texels are painted with `paint` evaluated on the sphere.
TriMesh uv_sphere(double radius, int slices, int stacks, int tex_width, int tex_height,
                  const ColorFn& paint = smooth_colors, const vec3& center = vec3::Zero());

// Axis-aligned box [-half, half] with 8 shared vertices, 12 faces and one UV
// chart per side laid out 3x2 in the texture.
TriMesh textured_box(const vec3& half, int tex_size, const ColorFn& paint = smooth_colors);

// Box with vertex colors from `paint`.
TriMesh colored_box(const vec3& half, const ColorFn& paint = smooth_colors);

// Square [-half, half]^2 in the plane z = `z`, facing +z, one constant color.
TriMesh quad(double half, double z, const rgb& color);

// Thick open-top cup: outer walls and floor, a rim, and an inner cavity whose
// surfaces face into the cavity. Opening points along +y.
TriMesh cup(double outer_half, double inner_half, double floor_height, const rgb& color);

// Replaces the color source by per-vertex colors from `paint`.
TriMesh with_vertex_colors(TriMesh mesh, const ColorFn& paint);

// Concatenates meshes sharing the same color source kind (vertex colors).
TriMesh merge(const std::vector<TriMesh>& meshes);

}  // namespace tfkit::shapes
