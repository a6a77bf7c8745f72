#include "tfkit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "binio.hpp"

namespace tfkit {

namespace fs = std::filesystem;

ColorSource TriMesh::color_source() const {
  return corner_uvs.empty() ? ColorSource::vertex_colors : ColorSource::texture;
}

vec3 TriMesh::face_normal(int face) const {
  vec3 n = (vertex(face, 1) - vertex(face, 0)).cross(vertex(face, 2) - vertex(face, 0));
  double len = n.norm();
  return len > 0 ? vec3(n / len) : vec3::Zero();
}

double TriMesh::face_area(int face) const {
  return 0.5 * (vertex(face, 1) - vertex(face, 0)).cross(vertex(face, 2) - vertex(face, 0)).norm();
}

vec3 TriMesh::interpolate(int face, const vec3& bary) const {
  return bary.x() * vertex(face, 0) + bary.y() * vertex(face, 1) + bary.z() * vertex(face, 2);
}

void validate_mesh(const TriMesh& mesh) {
  int nv = int(mesh.positions.size());
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    const auto& t = mesh.faces[f];
    for (int i : t)
      if (i < 0 || i >= nv)
        throw InputError("face " + std::to_string(f) + ": vertex index " + std::to_string(i) +
                         " out of range (" + std::to_string(nv) + " vertices)");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw InputError("face " + std::to_string(f) + ": repeated vertex index");
  }
  bool textured = !mesh.corner_uvs.empty();
  bool colored = !mesh.vertex_colors.empty();
  if (textured == colored)
    throw InputError(textured ? "mesh has both texture and vertex colors"
                              : "no color source (need UVs with a texture, or vertex colors)");
  if (textured) {
    if (mesh.corner_uvs.size() != mesh.faces.size())
      throw InputError("corner uv count does not match face count");
    if (mesh.texture.empty() || mesh.texture.channels != 3)
      throw InputError("textured mesh needs an RGB texture image");
  } else if (mesh.vertex_colors.size() != mesh.positions.size()) {
    throw InputError("vertex color count does not match vertex count");
  }
}

Bounds3 mesh_bounds(const TriMesh& mesh) {
  Bounds3 b;
  for (const auto& p : mesh.positions) b.expand(p);
  return b;
}

std::pair<TriMesh, Similarity> normalize_unit(const TriMesh& mesh, double margin) {
  if (mesh.positions.empty()) throw InputError("zero-extent mesh");
  if (!(margin >= 0 && margin < 1)) throw InputError("margin must lie in [0, 1)");
  auto bounds = mesh_bounds(mesh);
  double longest = bounds.extent().maxCoeff();
  if (!(longest > 0)) throw InputError("zero-extent mesh");
  Similarity xf;
  xf.scale = 2 * (1 - margin) / longest;
  xf.translation = -xf.scale * bounds.center();
  TriMesh out = mesh;
  for (auto& p : out.positions) p = xf.apply(p);
  return {std::move(out), xf};
}

rgb surface_color(const TriMesh& mesh, int face, const vec3& bary) {
  if (mesh.corner_uvs.empty()) {
    const auto& t = mesh.faces[face];
    return bary.x() * mesh.vertex_colors[t[0]] + bary.y() * mesh.vertex_colors[t[1]] +
           bary.z() * mesh.vertex_colors[t[2]];
  }
  const auto& uv = mesh.corner_uvs[face];
  vec2 p = bary.x() * uv[0] + bary.y() * uv[1] + bary.z() * uv[2];
  return sample_bilinear(mesh.texture, p);
}

std::vector<SurfaceSample> sample_surface(const TriMesh& mesh, size_t count, std::uint64_t seed) {
  std::vector<double> cdf(mesh.faces.size());
  double total = 0;
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    total += mesh.face_area(int(f));
    cdf[f] = total;
  }
  if (!(total > 0)) throw InputError("mesh has zero total area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<SurfaceSample> samples(count);
  for (auto& s : samples) {
    double r = uniform(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    int face = int(std::min<size_t>(it - cdf.begin(), cdf.size() - 1));
    // skip zero-area faces that share a cdf value with their successor
    while (mesh.face_area(face) == 0 && face + 1 < int(cdf.size())) face++;
    double r1 = std::sqrt(uniform(rng)), r2 = uniform(rng);
    double a = 1 - r1, b = r1 * (1 - r2);
    s.face_id = face;
    s.bary = {a, b, std::max(0.0, 1 - a - b)};
    s.position = mesh.interpolate(face, s.bary);
    s.normal = mesh.face_normal(face);
    s.color = surface_color(mesh, face, s.bary);
  }
  return samples;
}

// -----------------------------------------------------------------------------
// OBJ / MTL
// -----------------------------------------------------------------------------

namespace {

struct ObjCorner {
  int v = -1, vt = -1;
};

int resolve_index(const std::string& token, int count, int line, const char* what) {
  int idx = 0;
  try {
    idx = std::stoi(token);
  } catch (...) {
    throw InputError("line " + std::to_string(line) + ": bad " + what + " index '" + token + "'");
  }
  int resolved = idx > 0 ? idx - 1 : count + idx;
  if (idx == 0 || resolved < 0 || resolved >= count)
    throw InputError("line " + std::to_string(line) + ": " + what + " index " + token +
                     " out of range (" + std::to_string(count) + " defined)");
  return resolved;
}

std::map<std::string, fs::path> parse_mtl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("material library not found: " + path.string());
  std::map<std::string, fs::path> maps;
  std::string line, current;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "newmtl") {
      ss >> current;
    } else if (key == "map_Kd") {
      // options such as -s precede the file name; the name is the last token
      std::string tok, last;
      while (ss >> tok) last = tok;
      if (!last.empty()) maps[current] = path.parent_path() / last;
    }
  }
  return maps;
}

}  // namespace

TriMesh load_mesh(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh " + path.string());

  TriMesh mesh;
  std::vector<vec2> uvs;
  std::vector<rgb> colors;
  std::map<std::string, fs::path> materials;
  std::string material;
  std::vector<int> face_line;
  std::vector<std::array<int, 3>> face_uv_index;
  std::vector<std::string> face_material;
  bool any_uv = false, all_uv = true;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    if (key == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw InputError("line " + std::to_string(line_no) + ": bad vertex");
      mesh.positions.emplace_back(x, y, z);
      double r, g, b;
      if (ss >> r >> g >> b) colors.emplace_back(r, g, b);
    } else if (key == "vt") {
      double u, v;
      if (!(ss >> u >> v)) throw InputError("line " + std::to_string(line_no) + ": bad texture coordinate");
      uvs.emplace_back(u, v);
    } else if (key == "f") {
      std::vector<ObjCorner> poly;
      std::string tok;
      while (ss >> tok) {
        ObjCorner c;
        auto s1 = tok.find('/');
        c.v = resolve_index(tok.substr(0, s1), int(mesh.positions.size()), line_no, "vertex");
        if (s1 != std::string::npos) {
          auto s2 = tok.find('/', s1 + 1);
          auto vt = tok.substr(s1 + 1, s2 == std::string::npos ? std::string::npos : s2 - s1 - 1);
          if (!vt.empty()) c.vt = resolve_index(vt, int(uvs.size()), line_no, "texture coordinate");
        }
        poly.push_back(c);
      }
      if (poly.size() < 3) throw InputError("line " + std::to_string(line_no) + ": face with fewer than 3 vertices");
      for (size_t k = 1; k + 1 < poly.size(); k++) {
        std::array<ObjCorner, 3> tri = {poly[0], poly[k], poly[k + 1]};
        mesh.faces.push_back({tri[0].v, tri[1].v, tri[2].v});
        bool has_uv = tri[0].vt >= 0 && tri[1].vt >= 0 && tri[2].vt >= 0;
        any_uv |= has_uv;
        all_uv &= has_uv;
        face_uv_index.push_back({tri[0].vt, tri[1].vt, tri[2].vt});
        face_line.push_back(line_no);
        face_material.push_back(material);
      }
    } else if (key == "mtllib") {
      std::string name;
      std::getline(ss >> std::ws, name);
      auto parsed = parse_mtl(path.parent_path() / name);
      materials.insert(parsed.begin(), parsed.end());
    } else if (key == "usemtl") {
      ss >> material;
    }
  }

  for (size_t f = 0; f < mesh.faces.size(); f++) {
    const auto& t = mesh.faces[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw InputError("line " + std::to_string(face_line[f]) + ": face with repeated vertex index");
  }

  if (mesh.faces.empty()) throw InputError("zero-extent mesh: no faces in " + path.string());

  std::optional<fs::path> texture_path;
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    auto it = materials.find(face_material[f]);
    if (it == materials.end()) continue;
    if (texture_path && *texture_path != it->second)
      throw InputError("line " + std::to_string(face_line[f]) + ": multiple diffuse textures are not supported");
    texture_path = it->second;
  }

  if (texture_path && any_uv) {
    if (!all_uv) {
      auto f = std::find_if(face_uv_index.begin(), face_uv_index.end(),
                            [](const auto& t) { return t[0] < 0 || t[1] < 0 || t[2] < 0; });
      throw InputError("line " + std::to_string(face_line[f - face_uv_index.begin()]) +
                       ": face lacks texture coordinates");
    }
    if (!fs::exists(*texture_path)) throw InputError("texture not found: " + texture_path->string());
    mesh.texture = read_png(*texture_path);
    if (mesh.texture.channels != 3) throw InputError("texture must be RGB: " + texture_path->string());
    for (const auto& t : face_uv_index) mesh.corner_uvs.push_back({uvs[t[0]], uvs[t[1]], uvs[t[2]]});
  } else if (!colors.empty()) {
    if (colors.size() != mesh.positions.size())
      throw InputError("vertex colors present on only some vertices");
    mesh.vertex_colors = std::move(colors);
  } else {
    throw InputError("no color source in " + path.string() + " (need map_Kd texture with UVs, or vertex colors)");
  }
  validate_mesh(mesh);
  return mesh;
}

void save_mesh(const fs::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh " + path.string());
  out.precision(17);
  bool textured = mesh.has_uvs();
  auto stem = path.stem().string();
  if (textured) {
    out << "mtllib " << stem << ".mtl\nusemtl material0\n";
    std::ofstream mtl(path.parent_path() / (stem + ".mtl"));
    mtl << "newmtl material0\nKd 1 1 1\nmap_Kd " << stem << "_texture.png\n";
    write_png(path.parent_path() / (stem + "_texture.png"), mesh.texture);
  }
  for (size_t i = 0; i < mesh.positions.size(); i++) {
    const auto& p = mesh.positions[i];
    out << "v " << p.x() << " " << p.y() << " " << p.z();
    if (!textured) {
      const auto& c = mesh.vertex_colors[i];
      out << " " << c.x() << " " << c.y() << " " << c.z();
    }
    out << "\n";
  }
  if (textured)
    for (const auto& corners : mesh.corner_uvs)
      for (const auto& uv : corners) out << "vt " << uv.x() << " " << uv.y() << "\n";
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    const auto& t = mesh.faces[f];
    out << "f";
    for (int k = 0; k < 3; k++) {
      out << " " << t[k] + 1;
      if (textured) out << "/" << 3 * f + k + 1;
    }
    out << "\n";
  }
  if (!out) throw InputError("cannot write mesh " + path.string());
}

void write_ply(const fs::path& path, const TriMesh& mesh, const std::vector<rgb>& vertex_colors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write ply " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.positions.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (size_t i = 0; i < mesh.positions.size(); i++) {
    for (int k = 0; k < 3; k++) binio::put(out, float(mesh.positions[i][k]));
    for (int k = 0; k < 3; k++)
      binio::put(out, std::uint8_t(std::lround(std::clamp(vertex_colors[i][k], 0.0, 1.0) * 255)));
  }
  for (const auto& t : mesh.faces) {
    binio::put(out, std::uint8_t(3));
    for (int i : t) binio::put(out, std::int32_t(i));
  }
  if (!out) throw InputError("cannot write ply " + path.string());
}

}  // namespace tfkit
