#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tfkit/spatial.hpp"

namespace tfkit {

constexpr float default_tau = 0.025f;
inline const vec3f default_background = vec3f::Constant(0.5f);

// One supervision point of the truncated texture function. Stored in f32 so
// a sample written to disk and read back satisfies the same invariants.
struct TfSample {
  vec3f query = vec3f::Zero();
  float distance = 0;
  vec3f color = vec3f::Zero();
  bool in_shell = false;

  friend bool operator==(const TfSample&, const TfSample&) = default;
};

// Fractions of near-surface (two Gaussian widths) and uniform-in-cube points.
struct SamplingMix {
  double near_narrow = 0.5;
  double near_wide = 0.25;
  double uniform = 0.25;
  double sigma_narrow = 0.01;
  double sigma_wide = 0.05;

  void validate() const;
  friend bool operator==(const SamplingMix&, const SamplingMix&) = default;
};

struct TfDataset {
  std::vector<TfSample> samples;
  float tau = default_tau;
  vec3f background = default_background;
  std::string mesh_id;
  std::uint64_t seed = 0;
  std::optional<SamplingMix> mix;  // not stored in the file
};

// Colors the query with the surface color of its nearest point when it lies
// within tau of the surface, and with `background` otherwise.
TfSample tf_query(const Bvh& bvh, const TriMesh& mesh, const vec3& x, float tau,
                  const vec3f& background = default_background);

// Labels points in parallel; output order follows input order.
std::vector<TfSample> tf_query_batch(const Bvh& bvh, const TriMesh& mesh, std::span<const vec3> points,
                                     float tau, const vec3f& background = default_background);

// Points snapped to f32 so the stored query is the point that was labeled.
std::vector<vec3> draw_tf_points(const TriMesh& mesh, size_t count, const SamplingMix& mix, std::uint64_t seed);

TfDataset sample_tf_dataset(const Bvh& bvh, const TriMesh& mesh, size_t count, const SamplingMix& mix,
                            float tau, const vec3f& background, std::uint64_t seed,
                            const std::string& mesh_id = "");

constexpr std::uint32_t tfds_version = 1;
constexpr size_t tfds_record_size = 29;

// "TFDS" | version u32 | n u64 | tau f32 | background 3xf32 | seed u64 |
// mesh_id (u32 length + UTF-8) | n x {query 3xf32, distance f32,
// color 3xf32, in_shell u8}; little-endian, no padding.
void write_dataset(const TfDataset& ds, const std::filesystem::path& path);
TfDataset read_dataset(const std::filesystem::path& path);
size_t dataset_header_size(const std::string& mesh_id);

}  // namespace tfkit
