#include "tfkit/texfunc.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "binio.hpp"

namespace tfkit {

void SamplingMix::validate() const {
  for (double f : {near_narrow, near_wide, uniform})
    if (!(f >= 0 && f <= 1)) throw InputError("sampling fractions must lie in [0, 1]");
  if (std::abs(near_narrow + near_wide + uniform - 1) > 1e-9)
    throw InputError("sampling fractions must sum to 1");
  if (!(sigma_narrow >= 0 && sigma_wide >= 0)) throw InputError("sampling sigmas must be >= 0");
}

TfSample tf_query(const Bvh& bvh, const TriMesh& mesh, const vec3& x, float tau, const vec3f& background) {
  TfSample s;
  s.query = x.cast<float>();
  auto hit = closest_point(bvh, mesh, s.query.cast<double>());
  s.distance = float(hit.distance);
  s.in_shell = s.distance <= tau;
  s.color = s.in_shell ? vec3f(surface_color(mesh, hit.face_id, hit.bary).cast<float>()) : background;
  return s;
}

std::vector<TfSample> tf_query_batch(const Bvh& bvh, const TriMesh& mesh, std::span<const vec3> points,
                                     float tau, const vec3f& background) {
  if (!(tau > 0)) throw InputError("tau must be > 0");
  std::vector<TfSample> out(points.size());
  const long n = long(points.size());
#pragma omp parallel for schedule(dynamic, 256) num_threads(threads())
  for (long i = 0; i < n; i++) out[i] = tf_query(bvh, mesh, points[i], tau, background);
  return out;
}

std::vector<vec3> draw_tf_points(const TriMesh& mesh, size_t count, const SamplingMix& mix, std::uint64_t seed) {
  mix.validate();
  if (count == 0) throw InputError("sample count must be > 0");
  size_t n_narrow = size_t(std::llround(double(count) * mix.near_narrow));
  size_t n_wide = std::min(count - n_narrow, size_t(std::llround(double(count) * mix.near_wide)));
  size_t n_uniform = count - n_narrow - n_wide;

  std::vector<vec3> points;
  points.reserve(count);
  if (n_narrow + n_wide > 0) {
    auto surface = sample_surface(mesh, n_narrow + n_wide, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (size_t i = 0; i < surface.size(); i++) {
      double sigma = i < n_narrow ? mix.sigma_narrow : mix.sigma_wide;
      vec3 offset(gauss(rng), gauss(rng), gauss(rng));
      points.push_back(surface[i].position + sigma * offset);
    }
  }
  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4full);
  std::uniform_real_distribution<double> cube(-1.0, 1.0);
  for (size_t i = 0; i < n_uniform; i++) {
    double x = cube(rng), y = cube(rng), z = cube(rng);
    points.emplace_back(x, y, z);
  }
  for (auto& p : points) p = p.cast<float>().cast<double>();
  return points;
}

TfDataset sample_tf_dataset(const Bvh& bvh, const TriMesh& mesh, size_t count, const SamplingMix& mix,
                            float tau, const vec3f& background, std::uint64_t seed, const std::string& mesh_id) {
  if (!(tau > 0)) throw InputError("tau must be > 0");
  TfDataset ds;
  ds.tau = tau;
  ds.background = background;
  ds.seed = seed;
  ds.mesh_id = mesh_id;
  ds.mix = mix;
  auto points = draw_tf_points(mesh, count, mix, seed);
  ds.samples = tf_query_batch(bvh, mesh, points, tau, background);
  return ds;
}

namespace {
constexpr char tfds_magic[4] = {'T', 'F', 'D', 'S'};
}

size_t dataset_header_size(const std::string& mesh_id) { return 4 + 4 + 8 + 4 + 12 + 8 + 4 + mesh_id.size(); }

void write_dataset(const TfDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write dataset " + path.string());
  out.write(tfds_magic, 4);
  binio::put(out, tfds_version);
  binio::put(out, std::uint64_t(ds.samples.size()));
  binio::put(out, ds.tau);
  for (int k = 0; k < 3; k++) binio::put(out, ds.background[k]);
  binio::put(out, ds.seed);
  binio::put(out, std::uint32_t(ds.mesh_id.size()));
  out.write(ds.mesh_id.data(), std::streamsize(ds.mesh_id.size()));
  for (const auto& s : ds.samples) {
    for (int k = 0; k < 3; k++) binio::put(out, s.query[k]);
    binio::put(out, s.distance);
    for (int k = 0; k < 3; k++) binio::put(out, s.color[k]);
    binio::put(out, std::uint8_t(s.in_shell ? 1 : 0));
  }
  if (!out) throw InputError("cannot write dataset " + path.string());
}

TfDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset " + path.string());
  char magic[4] = {};
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, tfds_magic))
    throw InputError("bad magic in " + path.string());
  auto version = binio::get<std::uint32_t>(in, "version");
  if (version != tfds_version)
    throw InputError("unsupported dataset version " + std::to_string(version) + " in " + path.string());
  TfDataset ds;
  auto n = binio::get<std::uint64_t>(in, "sample count");
  ds.tau = binio::get<float>(in, "tau");
  for (int k = 0; k < 3; k++) ds.background[k] = binio::get<float>(in, "background");
  ds.seed = binio::get<std::uint64_t>(in, "seed");
  auto len = binio::get<std::uint32_t>(in, "mesh id length");
  ds.mesh_id.resize(len);
  if (!in.read(ds.mesh_id.data(), len)) throw InputError("truncated file while reading mesh id");

  // guard the allocation against a corrupt count
  auto here = in.tellg();
  in.seekg(0, std::ios::end);
  auto remaining = std::uint64_t(in.tellg() - here);
  in.seekg(here);
  if (remaining < n * tfds_record_size)
    throw InputError("truncated file: header declares " + std::to_string(n) + " records");

  ds.samples.resize(n);
  for (auto& s : ds.samples) {
    for (int k = 0; k < 3; k++) s.query[k] = binio::get<float>(in, "record");
    s.distance = binio::get<float>(in, "record");
    for (int k = 0; k < 3; k++) s.color[k] = binio::get<float>(in, "record");
    s.in_shell = binio::get<std::uint8_t>(in, "record") != 0;
  }
  return ds;
}

}  // namespace tfkit
