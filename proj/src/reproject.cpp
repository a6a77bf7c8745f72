#include "tfkit/reproject.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binio.hpp"

namespace tfkit {

namespace fs = std::filesystem;

ViewSet read_views(const fs::path& dir) {
  auto cams = read_rig(dir / "rig.txt");
  if (cams.empty()) throw InputError("rig in " + dir.string() + " has no views");
  ViewSet views;
  for (size_t i = 0; i < cams.size(); i++) {
    View v;
    v.camera = cams[i];
    auto depth_path = view_image_path(dir, i, "depth");
    if (!fs::exists(depth_path)) throw InputError("missing depth image " + depth_path.string());
    v.color = read_png(view_image_path(dir, i, "color"));
    v.depth = read_pfm(depth_path);
    v.mask = read_png_u8(view_image_path(dir, i, "mask"));
    int w = v.camera.width, h = v.camera.height;
    auto same = [&](int iw, int ih) { return iw == w && ih == h; };
    if (!same(v.color.width, v.color.height) || !same(v.depth.width, v.depth.height) ||
        !same(v.mask.width, v.mask.height) || v.color.channels != 3 || v.depth.channels != 1)
      throw InputError("view " + std::to_string(i) + " images do not match the rig resolution");
    views.push_back(std::move(v));
  }
  return views;
}

double PartialTexture::valid_fraction() const {
  if (valid.empty()) return 0;
  return double(std::count(valid.begin(), valid.end(), true)) / double(valid.size());
}

std::vector<ReprojectTarget> sample_targets(const std::vector<SurfaceSample>& samples) {
  std::vector<ReprojectTarget> targets;
  targets.reserve(samples.size());
  for (const auto& s : samples) targets.push_back({s.position, s.normal});
  return targets;
}

bool view_contribution(const View& view, const vec3& position, const vec3& normal, const ReprojectOptions& opt,
                       rgb& color, double& weight) {
  const auto& cam = view.camera;
  double facing = -normal.dot(cam.view_dir);
  if (!(facing > 0)) return false;
  auto pr = project(cam, position);
  double px = pr.pixel.x(), py = pr.pixel.y();
  if (!(px >= 0 && px < cam.width && py >= 0 && py < cam.height)) return false;
  int ix = std::min(int(px), cam.width - 1), iy = std::min(int(py), cam.height - 1);
  if (view.mask.at(ix, iy) == 0) return false;

  // Bilinear depth and color when the four surrounding pixel centers belong
  // to the same local surface; otherwise the containing pixel.
  double fx = px - 0.5, fy = py - 0.5;
  int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
  bool smooth = x0 >= 0 && y0 >= 0 && x0 + 1 < cam.width && y0 + 1 < cam.height;
  double local = 4 * cam.texel_size();
  for (int dy = 0; smooth && dy < 2; dy++)
    for (int dx = 0; smooth && dx < 2; dx++)
      smooth = view.mask.at(x0 + dx, y0 + dy) != 0 &&
               std::abs(view.depth.at(x0 + dx, y0 + dy) - pr.depth) <= local;
  double depth;
  if (smooth) {
    double tx = fx - x0, ty = fy - y0;
    double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    depth = 0;
    color = rgb::Zero();
    for (int k = 0; k < 4; k++) {
      int x = x0 + (k & 1), y = y0 + (k >> 1);
      depth += w[k] * view.depth.at(x, y);
      color += w[k] * pixel_rgb(view.color, x, y);
    }
  } else {
    depth = view.depth.at(ix, iy);
    color = pixel_rgb(view.color, ix, iy);
  }
  if (!(std::abs(depth - pr.depth) <= opt.eps_z)) return false;
  weight = std::pow(facing, opt.power);
  return true;
}

namespace {

void accumulate(const ViewSet& views, PartialTexture& out, const ReprojectOptions& opt) {
  out.w_min = opt.w_min;
  size_t n = out.positions.size();
  out.colors.assign(n, rgb::Zero());
  out.weights.assign(n, 0.0);
  out.valid.assign(n, false);
  std::vector<char> valid(n, 0);
  const long count = long(n);
#pragma omp parallel for schedule(dynamic, 256) num_threads(threads())
  for (long i = 0; i < count; i++) {
    rgb sum = rgb::Zero();
    double wsum = 0;
    for (const auto& view : views) {
      rgb c;
      double w;
      if (view_contribution(view, out.positions[i], out.normals[i], opt, c, w)) {
        sum += w * c;
        wsum += w;
      }
    }
    out.weights[i] = wsum;
    if (wsum > 0) out.colors[i] = sum / wsum;
    valid[i] = wsum >= opt.w_min;
  }
  for (size_t i = 0; i < n; i++) out.valid[i] = valid[i] != 0;
}

}  // namespace

PartialTexture reproject(const ViewSet& views, const std::vector<ReprojectTarget>& targets,
                         const ReprojectOptions& opt) {
  if (views.empty()) throw InputError("reproject needs at least one view");
  PartialTexture out;
  out.domain = PartialDomain::samples;
  for (const auto& t : targets) {
    out.positions.push_back(t.position);
    out.normals.push_back(t.normal);
  }
  accumulate(views, out, opt);
  return out;
}

PartialTexture reproject_uv(const TriMesh& mesh, const ViewSet& views, int width, int height,
                            const ReprojectOptions& opt) {
  if (views.empty()) throw InputError("reproject needs at least one view");
  auto cov = rasterize_uv(mesh, width, height);
  PartialTexture out;
  out.domain = PartialDomain::uv_texels;
  out.uv_width = width;
  out.uv_height = height;
  for (size_t i = 0; i < cov.face.size(); i++) {
    if (cov.face[i] < 0) continue;
    out.texel_index.push_back(int(i));
    out.positions.push_back(mesh.interpolate(cov.face[i], cov.bary[i]));
    out.normals.push_back(mesh.face_normal(cov.face[i]));
  }
  accumulate(views, out, opt);
  return out;
}

double blend_alpha(double weight, bool valid, const BlendOptions& opt) {
  if (!valid) return 0;
  return std::pow(std::clamp(weight / opt.w_sat, 0.0, 1.0), opt.k);
}

std::vector<rgb> blend(const PartialTexture& partial, const Predictor& predictor, const BlendOptions& opt) {
  std::vector<rgb> out(partial.size());
  const long n = long(partial.size());
#pragma omp parallel for schedule(static) num_threads(threads())
  for (long i = 0; i < n; i++) {
    double a = blend_alpha(partial.weights[i], partial.valid[i], opt);
    if (a == 1) out[i] = partial.colors[i];
    else if (a == 0) out[i] = predictor(partial.positions[i]);
    else out[i] = a * partial.colors[i] + (1 - a) * predictor(partial.positions[i]);
  }
  return out;
}

// -----------------------------------------------------------------------------
// PLY point cloud
// -----------------------------------------------------------------------------

void write_partial_ply(const fs::path& path, const PartialTexture& partial) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write ply " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << partial.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property float weight\nend_header\n";
  for (size_t i = 0; i < partial.size(); i++) {
    for (int k = 0; k < 3; k++) binio::put(out, float(partial.positions[i][k]));
    for (int k = 0; k < 3; k++) binio::put(out, float(partial.normals[i][k]));
    for (int k = 0; k < 3; k++)
      binio::put(out, std::uint8_t(std::lround(std::clamp(partial.colors[i][k], 0.0, 1.0) * 255)));
    binio::put(out, float(partial.weights[i]));
  }
  if (!out) throw InputError("cannot write ply " + path.string());
}

PartialTexture read_partial_ply(const fs::path& path, double w_min) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read ply " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw InputError("not a ply file: " + path.string());
  size_t count = 0;
  std::vector<std::pair<std::string, std::string>> props;  // (type, name)
  bool in_vertex = false, binary_le = false;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format") {
      std::string fmt;
      ss >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (key == "element") {
      std::string name;
      ss >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ss >> count;
      else throw InputError("unexpected ply element '" + name + "' in " + path.string());
    } else if (key == "property" && in_vertex) {
      std::string type, name;
      ss >> type >> name;
      props.emplace_back(type, name);
    }
  }
  if (!binary_le) throw InputError("ply must be binary_little_endian: " + path.string());
  PartialTexture out;
  out.w_min = w_min;
  out.positions.resize(count, vec3::Zero());
  out.normals.resize(count, vec3::Zero());
  out.colors.resize(count, rgb::Zero());
  out.weights.resize(count, 0.0);
  out.valid.resize(count, false);
  bool has_weight = false;
  for (size_t i = 0; i < count; i++) {
    for (const auto& [type, name] : props) {
      double v = 0;
      if (type == "float") v = binio::get<float>(in, "ply vertex");
      else if (type == "double") v = binio::get<double>(in, "ply vertex");
      else if (type == "uchar") v = binio::get<std::uint8_t>(in, "ply vertex") / 255.0;
      else if (type == "int") v = binio::get<std::int32_t>(in, "ply vertex");
      else throw InputError("unsupported ply property type " + type);
      if (name == "x") out.positions[i].x() = v;
      else if (name == "y") out.positions[i].y() = v;
      else if (name == "z") out.positions[i].z() = v;
      else if (name == "nx") out.normals[i].x() = v;
      else if (name == "ny") out.normals[i].y() = v;
      else if (name == "nz") out.normals[i].z() = v;
      else if (name == "red") out.colors[i].x() = v;
      else if (name == "green") out.colors[i].y() = v;
      else if (name == "blue") out.colors[i].z() = v;
      else if (name == "weight") {
        out.weights[i] = v;
        has_weight = true;
      }
    }
    out.valid[i] = out.weights[i] >= w_min;
  }
  if (count > 0 && !has_weight) throw InputError("ply has no weight property: " + path.string());
  return out;
}

void write_partial_texture(const fs::path& png, const fs::path& weight_pfm, const PartialTexture& partial) {
  if (partial.domain != PartialDomain::uv_texels) throw InputError("partial texture is not in texel mode");
  ImageF color(partial.uv_width, partial.uv_height, 3);
  ImageF weight(partial.uv_width, partial.uv_height, 1);
  for (size_t i = 0; i < partial.size(); i++) {
    int t = partial.texel_index[i];
    int x = t % partial.uv_width, y = t / partial.uv_width;
    set_pixel_rgb(color, x, y, partial.colors[i]);
    weight.at(x, y) = float(partial.weights[i]);
  }
  write_png(png, color);
  write_pfm(weight_pfm, weight);
}

// -----------------------------------------------------------------------------
// Nearest lookup
// -----------------------------------------------------------------------------

std::uint64_t PartialLookup::key(long x, long y, long z) const {
  auto h = [](long v) { return std::uint64_t(v + (1 << 20)) & 0x1fffff; };
  return (h(x) << 42) | (h(y) << 21) | h(z);
}

PartialLookup::PartialLookup(const PartialTexture& partial, double radius)
    : partial_(&partial), radius_(radius), cell_(radius) {
  if (!(radius > 0)) throw InputError("lookup radius must be > 0");
  for (size_t i = 0; i < partial.size(); i++) {
    const auto& p = partial.positions[i];
    cells_.emplace_back(key(long(std::floor(p.x() / cell_)), long(std::floor(p.y() / cell_)),
                            long(std::floor(p.z() / cell_))),
                        int(i));
  }
  std::sort(cells_.begin(), cells_.end());
}

int PartialLookup::nearest(const vec3& p) const {
  long cx = long(std::floor(p.x() / cell_)), cy = long(std::floor(p.y() / cell_)),
       cz = long(std::floor(p.z() / cell_));
  int best = -1;
  double best_d = radius_ * radius_;
  for (long dz = -1; dz <= 1; dz++)
    for (long dy = -1; dy <= 1; dy++)
      for (long dx = -1; dx <= 1; dx++) {
        auto k = key(cx + dx, cy + dy, cz + dz);
        auto it = std::lower_bound(cells_.begin(), cells_.end(), std::make_pair(k, -1));
        for (; it != cells_.end() && it->first == k; ++it) {
          double d = (partial_->positions[it->second] - p).squaredNorm();
          if (d < best_d || (d == best_d && it->second < best)) {
            best_d = d;
            best = it->second;
          }
        }
      }
  return best;
}

}  // namespace tfkit
