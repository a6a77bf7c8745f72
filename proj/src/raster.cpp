#include "tfkit/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace tfkit {

void OrthoCamera::validate() const {
  if (std::abs(view_dir.norm() - 1) > 1e-9 || std::abs(up.norm() - 1) > 1e-9)
    throw InputError("camera directions must be unit vectors");
  if (std::abs(view_dir.dot(up)) > 1e-9) throw InputError("camera up must be orthogonal to view_dir");
  if (!(near < far)) throw InputError("camera near must be < far");
  if (width <= 0 || height <= 0 || !(half_extent > 0)) throw InputError("camera resolution and extent must be > 0");
}

Projection project(const OrthoCamera& cam, const vec3& p) {
  double t = cam.texel_size();
  return {vec2(cam.width / 2.0 + p.dot(cam.right()) / t, cam.height / 2.0 - p.dot(cam.up) / t),
          p.dot(cam.view_dir) + camera_eye_distance};
}

vec3 unproject(const OrthoCamera& cam, const vec2& pixel, double depth) {
  double t = cam.texel_size();
  return (pixel.x() - cam.width / 2.0) * t * cam.right() + (cam.height / 2.0 - pixel.y()) * t * cam.up +
         (depth - camera_eye_distance) * cam.view_dir;
}

std::vector<OrthoCamera> six_views(int resolution, double half_extent) {
  if (resolution <= 0) throw InputError("resolution must be > 0");
  const std::array<std::pair<vec3, vec3>, 6> rig = {{
      {{-1, 0, 0}, {0, 1, 0}},
      {{1, 0, 0}, {0, 1, 0}},
      {{0, -1, 0}, {0, 0, 1}},
      {{0, 1, 0}, {0, 0, -1}},
      {{0, 0, -1}, {0, 1, 0}},
      {{0, 0, 1}, {0, 1, 0}},
  }};
  std::vector<OrthoCamera> cams;
  for (const auto& [dir, up] : rig) {
    OrthoCamera c;
    c.view_dir = dir;
    c.up = up;
    c.half_extent = half_extent;
    c.width = c.height = resolution;
    cams.push_back(c);
  }
  return cams;
}

unsigned parse_render_modes(const std::string& list) {
  unsigned modes = 0;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "color") modes |= render_color;
    else if (item == "normal") modes |= render_normal;
    else if (item == "ccm") modes |= render_ccm;
    else if (item == "depth") modes |= render_depth;
    else if (item == "mask") modes |= render_mask;
    else throw InputError("unknown render mode '" + item + "'");
  }
  if (modes == 0) throw InputError("no render modes requested");
  return modes;
}

namespace {

struct ScreenTriangle {
  std::array<vec3, 3> v;  // pixel x, pixel y, depth
  double area = 0;
};

double edge(const vec3& a, const vec3& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

ScreenTriangle screen_triangle(const TriMesh& mesh, const OrthoCamera& cam, int face) {
  ScreenTriangle st;
  for (int k = 0; k < 3; k++) {
    auto pr = project(cam, mesh.vertex(face, k));
    st.v[k] = {pr.pixel.x(), pr.pixel.y(), pr.depth};
  }
  st.area = edge(st.v[0], st.v[1], st.v[2].x(), st.v[2].y());
  return st;
}

struct Fragment {
  double depth = std::numeric_limits<double>::infinity();
  int face = -1;
  vec3 bary = vec3::Zero();
};

// Shared coverage test of both renderers; double-sided, edges inclusive.
inline void shade_fragment(const ScreenTriangle& st, int face, const OrthoCamera& cam, int x, int y,
                           Fragment& frag) {
  if (st.area == 0) return;
  double px = x + 0.5, py = y + 0.5;
  double w0 = edge(st.v[1], st.v[2], px, py);
  double w1 = edge(st.v[2], st.v[0], px, py);
  double w2 = edge(st.v[0], st.v[1], px, py);
  if (st.area < 0) {
    w0 = -w0;
    w1 = -w1;
    w2 = -w2;
  }
  if (w0 < 0 || w1 < 0 || w2 < 0) return;
  double area = std::abs(st.area);
  vec3 bary(w0 / area, w1 / area, w2 / area);
  double depth = bary.x() * st.v[0].z() + bary.y() * st.v[1].z() + bary.z() * st.v[2].z();
  if (depth < cam.near || depth > cam.far) return;
  if (depth < frag.depth) {
    frag.depth = depth;
    frag.face = face;
    frag.bary = bary;
  }
}

RenderOutput allocate(const OrthoCamera& cam, unsigned modes) {
  RenderOutput out;
  int w = cam.width, h = cam.height;
  if (modes & render_color) out.color = ImageF(w, h, 3);
  if (modes & render_normal) out.normal = ImageF(w, h, 3);
  if (modes & render_ccm) out.ccm = ImageF(w, h, 3);
  if (modes & render_depth) out.depth = ImageF(w, h, 1, std::numeric_limits<float>::infinity());
  if (modes & render_mask) out.mask = ImageU8(w, h, 1);
  out.face_id.assign(size_t(w) * h, -1);
  return out;
}

void resolve(const TriMesh& mesh, const OrthoCamera& cam, unsigned modes, int x, int y, const Fragment& frag,
             RenderOutput& out) {
  if (frag.face < 0) return;
  out.face_id[size_t(y) * cam.width + x] = frag.face;
  if (modes & render_color) set_pixel_rgb(out.color, x, y, surface_color(mesh, frag.face, frag.bary));
  if (modes & render_normal) {
    vec3 n = mesh.face_normal(frag.face);
    if (n.dot(cam.view_dir) > 0) n = -n;
    set_pixel_rgb(out.normal, x, y, encode_unit(n));
  }
  if (modes & render_ccm) set_pixel_rgb(out.ccm, x, y, encode_unit(mesh.interpolate(frag.face, frag.bary)));
  if (modes & render_depth) out.depth.at(x, y) = float(frag.depth);
  if (modes & render_mask) out.mask.at(x, y) = 255;
}

constexpr int tile_size = 32;

}  // namespace

RenderOutput render(const TriMesh& mesh, const OrthoCamera& cam, unsigned modes) {
  cam.validate();
  RenderOutput out = allocate(cam, modes);
  int nf = int(mesh.faces.size());
  std::vector<ScreenTriangle> tris(nf);
  for (int f = 0; f < nf; f++) tris[f] = screen_triangle(mesh, cam, f);

  // Bin triangles by pixel bounding box, one pixel of slack on each side so
  // the coverage test alone decides membership.
  int tiles_x = (cam.width + tile_size - 1) / tile_size;
  int tiles_y = (cam.height + tile_size - 1) / tile_size;
  std::vector<std::vector<int>> bins(size_t(tiles_x) * tiles_y);
  std::vector<std::array<int, 4>> boxes(nf);
  for (int f = 0; f < nf; f++) {
    const auto& st = tris[f];
    if (st.area == 0) continue;
    double minx = std::min({st.v[0].x(), st.v[1].x(), st.v[2].x()});
    double maxx = std::max({st.v[0].x(), st.v[1].x(), st.v[2].x()});
    double miny = std::min({st.v[0].y(), st.v[1].y(), st.v[2].y()});
    double maxy = std::max({st.v[0].y(), st.v[1].y(), st.v[2].y()});
    if (!(maxx >= -1 && minx <= cam.width + 1 && maxy >= -1 && miny <= cam.height + 1)) continue;
    int x0 = std::max(0, int(std::floor(minx - 0.5)) - 1);
    int x1 = std::min(cam.width - 1, int(std::ceil(maxx - 0.5)) + 1);
    int y0 = std::max(0, int(std::floor(miny - 0.5)) - 1);
    int y1 = std::min(cam.height - 1, int(std::ceil(maxy - 0.5)) + 1);
    if (x0 > x1 || y0 > y1) continue;
    boxes[f] = {x0, x1, y0, y1};
    for (int ty = y0 / tile_size; ty <= y1 / tile_size; ty++)
      for (int tx = x0 / tile_size; tx <= x1 / tile_size; tx++) bins[size_t(ty) * tiles_x + tx].push_back(f);
  }

  const long num_tiles = long(bins.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads())
  for (long t = 0; t < num_tiles; t++) {
    int tx = int(t % tiles_x), ty = int(t / tiles_x);
    int px0 = tx * tile_size, py0 = ty * tile_size;
    int px1 = std::min(cam.width, px0 + tile_size), py1 = std::min(cam.height, py0 + tile_size);
    std::vector<Fragment> frags(size_t(tile_size) * tile_size);
    for (int f : bins[t]) {
      const auto& box = boxes[f];
      for (int y = std::max(py0, box[2]); y <= std::min(py1 - 1, box[3]); y++)
        for (int x = std::max(px0, box[0]); x <= std::min(px1 - 1, box[1]); x++)
          shade_fragment(tris[f], f, cam, x, y, frags[size_t(y - py0) * tile_size + (x - px0)]);
    }
    for (int y = py0; y < py1; y++)
      for (int x = px0; x < px1; x++)
        resolve(mesh, cam, modes, x, y, frags[size_t(y - py0) * tile_size + (x - px0)], out);
  }
  return out;
}

RenderOutput render_reference(const TriMesh& mesh, const OrthoCamera& cam, unsigned modes) {
  cam.validate();
  RenderOutput out = allocate(cam, modes);
  int nf = int(mesh.faces.size());
  for (int y = 0; y < cam.height; y++)
    for (int x = 0; x < cam.width; x++) {
      Fragment frag;
      for (int f = 0; f < nf; f++) shade_fragment(screen_triangle(mesh, cam, f), f, cam, x, y, frag);
      resolve(mesh, cam, modes, x, y, frag, out);
    }
  return out;
}

UvCoverage rasterize_uv(const TriMesh& mesh, int width, int height) {
  if (!mesh.has_uvs()) throw InputError("mesh has no texture coordinates");
  UvCoverage cov;
  cov.width = width;
  cov.height = height;
  cov.face.assign(size_t(width) * height, -1);
  cov.bary.assign(size_t(width) * height, vec3::Zero());
  std::vector<std::uint8_t> hits(size_t(width) * height, 0);
  for (int f = 0; f < int(mesh.faces.size()); f++) {
    ScreenTriangle st;
    for (int k = 0; k < 3; k++) {
      const auto& uv = mesh.corner_uvs[f][k];
      st.v[k] = {uv.x() * width, (1 - uv.y()) * height, 0};
    }
    st.area = edge(st.v[0], st.v[1], st.v[2].x(), st.v[2].y());
    if (st.area == 0) continue;
    double minx = std::min({st.v[0].x(), st.v[1].x(), st.v[2].x()});
    double maxx = std::max({st.v[0].x(), st.v[1].x(), st.v[2].x()});
    double miny = std::min({st.v[0].y(), st.v[1].y(), st.v[2].y()});
    double maxy = std::max({st.v[0].y(), st.v[1].y(), st.v[2].y()});
    int x0 = std::max(0, int(std::floor(minx - 0.5)) - 1), x1 = std::min(width - 1, int(std::ceil(maxx - 0.5)) + 1);
    int y0 = std::max(0, int(std::floor(miny - 0.5)) - 1), y1 = std::min(height - 1, int(std::ceil(maxy - 0.5)) + 1);
    for (int y = y0; y <= y1; y++)
      for (int x = x0; x <= x1; x++) {
        double px = x + 0.5, py = y + 0.5;
        double w0 = edge(st.v[1], st.v[2], px, py);
        double w1 = edge(st.v[2], st.v[0], px, py);
        double w2 = edge(st.v[0], st.v[1], px, py);
        if (st.area < 0) {
          w0 = -w0;
          w1 = -w1;
          w2 = -w2;
        }
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        double area = std::abs(st.area);
        size_t i = size_t(y) * width + x;
        // texels on edges shared within a chart are not overlaps
        if (w0 > 0 && w1 > 0 && w2 > 0 && hits[i] < 2) hits[i]++;
        cov.face[i] = f;
        cov.bary[i] = vec3(w0 / area, w1 / area, w2 / area);
      }
  }
  for (auto h : hits) cov.overlap_texels += h >= 2 ? 1 : 0;
  return cov;
}

void write_rig(const std::filesystem::path& path, const std::vector<OrthoCamera>& cams) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write rig " + path.string());
  out.precision(17);
  out << "views=" << cams.size() << "\n";
  for (size_t i = 0; i < cams.size(); i++) {
    const auto& c = cams[i];
    std::string k = "view" + std::to_string(i) + ".";
    out << k << "dir=" << c.view_dir.x() << " " << c.view_dir.y() << " " << c.view_dir.z() << "\n";
    out << k << "up=" << c.up.x() << " " << c.up.y() << " " << c.up.z() << "\n";
    out << k << "half_extent=" << c.half_extent << "\n";
    out << k << "resolution=" << c.width << " " << c.height << "\n";
    out << k << "near=" << c.near << "\n";
    out << k << "far=" << c.far << "\n";
  }
}

std::vector<OrthoCamera> read_rig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read rig " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("bad rig line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> std::istringstream {
    auto it = kv.find(key);
    if (it == kv.end()) throw InputError("rig missing key " + key);
    return std::istringstream(it->second);
  };
  size_t n = 0;
  get("views") >> n;
  std::vector<OrthoCamera> cams(n);
  for (size_t i = 0; i < n; i++) {
    std::string k = "view" + std::to_string(i) + ".";
    auto& c = cams[i];
    auto d = get(k + "dir");
    d >> c.view_dir.x() >> c.view_dir.y() >> c.view_dir.z();
    auto u = get(k + "up");
    u >> c.up.x() >> c.up.y() >> c.up.z();
    get(k + "half_extent") >> c.half_extent;
    auto r = get(k + "resolution");
    r >> c.width >> c.height;
    get(k + "near") >> c.near;
    get(k + "far") >> c.far;
    c.validate();
  }
  return cams;
}

std::filesystem::path view_image_path(const std::filesystem::path& dir, size_t view, const std::string& kind) {
  bool png = kind == "color" || kind == "mask" || kind.ends_with("_png");
  std::string base = kind.ends_with("_png") ? kind.substr(0, kind.size() - 4) : kind;
  return dir / ("view" + std::to_string(view) + "_" + base + (png ? ".png" : ".pfm"));
}

void write_render(const std::filesystem::path& dir, size_t view, const RenderOutput& out, unsigned modes,
                  bool png_attributes) {
  if (modes & render_color) write_png(view_image_path(dir, view, "color"), out.color);
  if (modes & render_mask) write_png(view_image_path(dir, view, "mask"), out.mask);
  if (modes & render_normal) {
    write_pfm(view_image_path(dir, view, "normal"), out.normal);
    if (png_attributes) write_png(view_image_path(dir, view, "normal_png"), out.normal);
  }
  if (modes & render_ccm) {
    write_pfm(view_image_path(dir, view, "ccm"), out.ccm);
    if (png_attributes) write_png(view_image_path(dir, view, "ccm_png"), out.ccm);
  }
  if (modes & render_depth) write_pfm(view_image_path(dir, view, "depth"), out.depth);
}

}  // namespace tfkit
