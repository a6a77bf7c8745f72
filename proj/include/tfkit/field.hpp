#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tfkit/common.hpp"

namespace tfkit {

struct FieldConfig {
  int plane_res = 32;
  int plane_channels = 16;
  int cube_res = 8;
  int cube_channels = 8;
  int hidden = 64;
  int hidden_layers = 2;
  int mlp_input = 0;  // 0 derives 3 * plane_channels + cube_channels
  double init_std = 0.01;

  int input_dim() const { return 3 * plane_channels + cube_channels; }
  void validate() const;
  friend bool operator==(const FieldConfig&, const FieldConfig&) = default;
};

// Offsets into the flat parameter vector: planes XY, XZ, YZ (each
// [row = second axis][col = first axis][channel]), the cube
// ([z][y][x][channel]), then per MLP layer a row-major (out x in) weight
// matrix followed by its bias.
struct FieldLayout {
  explicit FieldLayout(const FieldConfig& config);

  int plane_res, plane_channels, cube_res, cube_channels;
  std::vector<int> widths;  // [input, hidden..., 3]
  size_t plane_size, cube_offset, cube_size, grid_count;
  std::vector<size_t> weight_offset, bias_offset;
  size_t total;

  size_t plane_offset(int p) const { return size_t(p) * plane_size; }
  int layers() const { return int(widths.size()) - 1; }
};

// Three feature planes, one feature cube and an MLP decoder.
class TriplaneCubeField {
 public:
  explicit TriplaneCubeField(const FieldConfig& config = {});

  const FieldConfig& config() const { return config_; }
  const FieldLayout& layout() const { return layout_; }
  std::span<float> params() { return params_; }
  std::span<const float> params() const { return params_; }
  std::span<float> plane(int p) { return params().subspan(layout_.plane_offset(p), layout_.plane_size); }
  std::span<float> cube() { return params().subspan(layout_.cube_offset, layout_.cube_size); }
  std::span<float> weights(int layer);
  std::span<float> bias(int layer);

  bool all_finite() const;

 private:
  FieldConfig config_;
  FieldLayout layout_;
  std::vector<float> params_;
};

// Interpolation corners of one query: bilinear on each plane, trilinear in
// the cube. Indices point at channel 0 of the corner's feature.
struct GridStencil {
  std::array<std::array<size_t, 4>, 3> plane_index;
  std::array<std::array<double, 4>, 3> plane_weight;
  std::array<size_t, 8> cube_index;
  std::array<double, 8> cube_weight;
};

// Coordinates outside [-1, 1] are clamped.
GridStencil grid_stencil(const FieldLayout& layout, const vec3& x);

// Features [plane_xy | plane_xz | plane_yz | cube] at x.
std::vector<double> grid_sample(const TriplaneCubeField& field, const vec3& x);

// sigmoid(MLP(grid_sample(x)))
rgb decode(const TriplaneCubeField& field, const vec3& x);

// Grid features ~ N(0, init_std^2), MLP weights uniform in
// +-sqrt(6 / (fan_in + fan_out)), biases zero.
TriplaneCubeField init_field(const FieldConfig& config, std::uint64_t seed);

// "TCF1" | 6 x u32 config | u64 parameter count | f32 parameters, all
// little-endian.
void save_field(const std::filesystem::path& path, const TriplaneCubeField& field);
TriplaneCubeField load_field(const std::filesystem::path& path);

}  // namespace tfkit
