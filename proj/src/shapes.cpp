#include "tfkit/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tfkit::shapes {

rgb smooth_colors(const vec3& p) {
  return {0.5 + 0.35 * std::sin(2.5 * p.x() + 0.3) * std::cos(1.5 * p.y()),
          0.5 + 0.3 * std::cos(2.0 * p.z() + p.x()),
          0.5 + 0.3 * std::sin(2.0 * p.y() - p.z() + 0.5)};
}

namespace {

void orient_outward(TriMesh& mesh, const vec3& center) {
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    int fi = int(f);
    vec3 c = (mesh.vertex(fi, 0) + mesh.vertex(fi, 1) + mesh.vertex(fi, 2)) / 3;
    if (mesh.face_normal(fi).dot(c - center) < 0) {
      std::swap(mesh.faces[f][1], mesh.faces[f][2]);
      if (mesh.has_uvs()) std::swap(mesh.corner_uvs[f][1], mesh.corner_uvs[f][2]);
    }
  }
}

void add_quad(TriMesh& mesh, const std::array<vec3, 4>& p, const vec3& normal, const rgb& color) {
  int base = int(mesh.positions.size());
  for (const auto& v : p) {
    mesh.positions.push_back(v);
    mesh.vertex_colors.push_back(color);
  }
  bool flip = (p[1] - p[0]).cross(p[2] - p[0]).dot(normal) < 0;
  if (flip) {
    mesh.faces.push_back({base, base + 2, base + 1});
    mesh.faces.push_back({base, base + 3, base + 2});
  } else {
    mesh.faces.push_back({base, base + 1, base + 2});
    mesh.faces.push_back({base, base + 2, base + 3});
  }
}

}  // namespace

TriMesh uv_sphere(double radius, int slices, int stacks, int tex_width, int tex_height,
                  const ColorFn& paint, const vec3& center) {
  using std::numbers::pi;
  auto point = [&](double theta, double phi) {
    return vec3(center + radius * vec3(std::sin(theta) * std::cos(phi), std::cos(theta),
                                       std::sin(theta) * std::sin(phi)));
  };
  TriMesh mesh;
  mesh.positions.push_back(point(0, 0));
  for (int i = 1; i < stacks; i++)
    for (int j = 0; j < slices; j++) mesh.positions.push_back(point(pi * i / stacks, 2 * pi * j / slices));
  mesh.positions.push_back(point(pi, 0));
  int south = int(mesh.positions.size()) - 1;

  auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
  auto uv = [&](int i, double j) { return vec2(j / slices, 1.0 - double(i) / stacks); };
  for (int j = 0; j < slices; j++) {
    mesh.faces.push_back({0, ring(1, j), ring(1, j + 1)});
    mesh.corner_uvs.push_back({uv(0, j + 0.5), uv(1, j), uv(1, j + 1)});
    for (int i = 1; i + 1 < stacks; i++) {
      mesh.faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
      mesh.corner_uvs.push_back({uv(i, j), uv(i + 1, j), uv(i + 1, j + 1)});
      mesh.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
      mesh.corner_uvs.push_back({uv(i, j), uv(i + 1, j + 1), uv(i, j + 1)});
    }
    mesh.faces.push_back({south, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
    mesh.corner_uvs.push_back({uv(stacks, j + 0.5), uv(stacks - 1, j + 1), uv(stacks - 1, j)});
  }
  orient_outward(mesh, center);

  mesh.texture = ImageF(tex_width, tex_height, 3);
  for (int y = 0; y < tex_height; y++)
    for (int x = 0; x < tex_width; x++) {
      double u = (x + 0.5) / tex_width, v = 1.0 - (y + 0.5) / tex_height;
      set_pixel_rgb(mesh.texture, x, y, paint(point(pi * (1 - v), 2 * pi * u)));
    }
  return mesh;
}

namespace {

struct BoxSide {
  vec3 normal, u, v;
};

// cross(u, v) == normal for each side
const std::array<BoxSide, 6> box_sides = {{
    {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
    {{-1, 0, 0}, {0, 0, 1}, {0, 1, 0}},
    {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}},
    {{0, -1, 0}, {1, 0, 0}, {0, 0, 1}},
    {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}},
    {{0, 0, -1}, {0, 1, 0}, {1, 0, 0}},
}};

constexpr double chart_inset = 0.125;

vec3 side_point(const BoxSide& side, const vec3& half, double s, double t) {
  return (side.normal + (2 * s - 1) * side.u + (2 * t - 1) * side.v).cwiseProduct(half);
}

int corner_index(const vec3& p) { return (p.x() > 0 ? 1 : 0) | (p.y() > 0 ? 2 : 0) | (p.z() > 0 ? 4 : 0); }

vec2 chart_uv(int side, double s, double t) {
  int col = side % 3, row = side / 3;
  double cs = chart_inset + s * (1 - 2 * chart_inset);
  double ct = chart_inset + t * (1 - 2 * chart_inset);
  return {(col + cs) / 3.0, 1.0 - (row + 1 - ct) / 2.0};
}

}  // namespace

TriMesh colored_box(const vec3& half, const ColorFn& paint) {
  TriMesh mesh;
  for (int i = 0; i < 8; i++)
    mesh.positions.emplace_back(i & 1 ? half.x() : -half.x(), i & 2 ? half.y() : -half.y(),
                                i & 4 ? half.z() : -half.z());
  const std::array<std::array<double, 2>, 4> st = {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  for (const auto& side : box_sides) {
    std::array<int, 4> idx;
    for (int k = 0; k < 4; k++) idx[k] = corner_index(side_point(side, half, st[k][0], st[k][1]));
    mesh.faces.push_back({idx[0], idx[1], idx[2]});
    mesh.faces.push_back({idx[0], idx[2], idx[3]});
  }
  for (const auto& p : mesh.positions) mesh.vertex_colors.push_back(paint(p));
  return mesh;
}

TriMesh textured_box(const vec3& half, int tex_size, const ColorFn& paint) {
  TriMesh mesh = colored_box(half, paint);
  mesh.vertex_colors.clear();
  const std::array<std::array<double, 2>, 4> st = {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  for (int side = 0; side < 6; side++) {
    std::array<vec2, 4> uv;
    for (int k = 0; k < 4; k++) uv[k] = chart_uv(side, st[k][0], st[k][1]);
    mesh.corner_uvs.push_back({uv[0], uv[1], uv[2]});
    mesh.corner_uvs.push_back({uv[0], uv[2], uv[3]});
  }
  int tw = tex_size, th = tex_size;
  mesh.texture = ImageF(tw, th, 3);
  for (int y = 0; y < th; y++)
    for (int x = 0; x < tw; x++) {
      double u = (x + 0.5) / tw, v = 1.0 - (y + 0.5) / th;
      int col = std::min(2, int(u * 3)), row = std::min(1, int((1 - v) * 2));
      double cs = u * 3 - col, ct = 1 - ((1 - v) * 2 - row);
      double s = std::clamp((cs - chart_inset) / (1 - 2 * chart_inset), 0.0, 1.0);
      double t = std::clamp((ct - chart_inset) / (1 - 2 * chart_inset), 0.0, 1.0);
      set_pixel_rgb(mesh.texture, x, y, paint(side_point(box_sides[row * 3 + col], half, s, t)));
    }
  return mesh;
}

TriMesh quad(double half, double z, const rgb& color) {
  TriMesh mesh;
  add_quad(mesh, {vec3(-half, -half, z), vec3(half, -half, z), vec3(half, half, z), vec3(-half, half, z)},
           {0, 0, 1}, color);
  return mesh;
}

TriMesh cup(double o, double i, double floor_height, const rgb& color) {
  TriMesh mesh;
  double fy = -o + floor_height;
  // outer bottom and walls
  add_quad(mesh, {vec3(-o, -o, -o), vec3(o, -o, -o), vec3(o, -o, o), vec3(-o, -o, o)}, {0, -1, 0}, color);
  add_quad(mesh, {vec3(o, -o, -o), vec3(o, o, -o), vec3(o, o, o), vec3(o, -o, o)}, {1, 0, 0}, color);
  add_quad(mesh, {vec3(-o, -o, -o), vec3(-o, -o, o), vec3(-o, o, o), vec3(-o, o, -o)}, {-1, 0, 0}, color);
  add_quad(mesh, {vec3(-o, -o, o), vec3(o, -o, o), vec3(o, o, o), vec3(-o, o, o)}, {0, 0, 1}, color);
  add_quad(mesh, {vec3(-o, -o, -o), vec3(-o, o, -o), vec3(o, o, -o), vec3(o, -o, -o)}, {0, 0, -1}, color);
  // rim
  add_quad(mesh, {vec3(-o, o, -o), vec3(o, o, -o), vec3(i, o, -i), vec3(-i, o, -i)}, {0, 1, 0}, color);
  add_quad(mesh, {vec3(o, o, -o), vec3(o, o, o), vec3(i, o, i), vec3(i, o, -i)}, {0, 1, 0}, color);
  add_quad(mesh, {vec3(o, o, o), vec3(-o, o, o), vec3(-i, o, i), vec3(i, o, i)}, {0, 1, 0}, color);
  add_quad(mesh, {vec3(-o, o, o), vec3(-o, o, -o), vec3(-i, o, -i), vec3(-i, o, i)}, {0, 1, 0}, color);
  // cavity walls face inward, floor faces up
  add_quad(mesh, {vec3(i, fy, -i), vec3(i, o, -i), vec3(i, o, i), vec3(i, fy, i)}, {-1, 0, 0}, color);
  add_quad(mesh, {vec3(-i, fy, -i), vec3(-i, fy, i), vec3(-i, o, i), vec3(-i, o, -i)}, {1, 0, 0}, color);
  add_quad(mesh, {vec3(-i, fy, i), vec3(i, fy, i), vec3(i, o, i), vec3(-i, o, i)}, {0, 0, -1}, color);
  add_quad(mesh, {vec3(-i, fy, -i), vec3(-i, o, -i), vec3(i, o, -i), vec3(i, fy, -i)}, {0, 0, 1}, color);
  add_quad(mesh, {vec3(-i, fy, -i), vec3(i, fy, -i), vec3(i, fy, i), vec3(-i, fy, i)}, {0, 1, 0}, color);
  return mesh;
}

TriMesh with_vertex_colors(TriMesh mesh, const ColorFn& paint) {
  mesh.corner_uvs.clear();
  mesh.texture = ImageF();
  mesh.vertex_colors.clear();
  for (const auto& p : mesh.positions) mesh.vertex_colors.push_back(paint(p));
  return mesh;
}

TriMesh merge(const std::vector<TriMesh>& meshes) {
  TriMesh out;
  for (const auto& m : meshes) {
    int base = int(out.positions.size());
    out.positions.insert(out.positions.end(), m.positions.begin(), m.positions.end());
    out.vertex_colors.insert(out.vertex_colors.end(), m.vertex_colors.begin(), m.vertex_colors.end());
    for (auto t : m.faces) out.faces.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return out;
}

}  // namespace tfkit::shapes
