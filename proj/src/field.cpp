#include "tfkit/field.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "binio.hpp"
#include "field_eval.hpp"

namespace tfkit {

void FieldConfig::validate() const {
  if (plane_res < 2 || cube_res < 2) throw InputError("plane and cube resolutions must be >= 2");
  if (plane_channels < 1 || cube_channels < 1) throw InputError("channel counts must be >= 1");
  if (hidden < 1 || hidden_layers < 1) throw InputError("MLP needs at least one hidden layer of width >= 1");
  if (mlp_input != 0 && mlp_input != input_dim())
    throw InputError("MLP input width " + std::to_string(mlp_input) + " does not match grid features (" +
                     std::to_string(input_dim()) + ")");
  if (!(init_std >= 0)) throw InputError("init_std must be >= 0");
}

FieldLayout::FieldLayout(const FieldConfig& c)
    : plane_res(c.plane_res), plane_channels(c.plane_channels), cube_res(c.cube_res), cube_channels(c.cube_channels) {
  c.validate();
  plane_size = size_t(plane_res) * plane_res * plane_channels;
  cube_offset = 3 * plane_size;
  cube_size = size_t(cube_res) * cube_res * cube_res * cube_channels;
  grid_count = cube_offset + cube_size;
  widths.push_back(c.input_dim());
  for (int l = 0; l < c.hidden_layers; l++) widths.push_back(c.hidden);
  widths.push_back(3);
  size_t offset = grid_count;
  for (int l = 0; l + 1 < int(widths.size()); l++) {
    weight_offset.push_back(offset);
    offset += size_t(widths[l]) * widths[l + 1];
    bias_offset.push_back(offset);
    offset += size_t(widths[l + 1]);
  }
  total = offset;
}

TriplaneCubeField::TriplaneCubeField(const FieldConfig& config)
    : config_(config), layout_(config), params_(layout_.total, 0.0f) {}

std::span<float> TriplaneCubeField::weights(int layer) {
  return params().subspan(layout_.weight_offset[layer],
                          size_t(layout_.widths[layer]) * layout_.widths[layer + 1]);
}

std::span<float> TriplaneCubeField::bias(int layer) {
  return params().subspan(layout_.bias_offset[layer], size_t(layout_.widths[layer + 1]));
}

bool TriplaneCubeField::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](float v) { return std::isfinite(v); });
}

namespace {

struct AxisWeight {
  int i0;
  double t;
};

// align-corners mapping of [-1, 1] onto nodes 0 .. res - 1
AxisWeight axis_weight(double x, int res) {
  double u = (std::clamp(x, -1.0, 1.0) + 1.0) * 0.5 * (res - 1);
  double r = std::round(u);
  if (std::abs(u - r) < 1e-9) u = r;
  int i0 = std::min(int(std::floor(u)), res - 2);
  return {i0, u - i0};
}

}  // namespace

GridStencil grid_stencil(const FieldLayout& L, const vec3& x) {
  GridStencil st;
  const int R = L.plane_res, C = L.plane_channels;
  auto ax = axis_weight(x.x(), R), ay = axis_weight(x.y(), R), az = axis_weight(x.z(), R);
  const std::array<std::pair<AxisWeight, AxisWeight>, 3> pairs = {{{ax, ay}, {ax, az}, {ay, az}}};
  for (int p = 0; p < 3; p++) {
    auto [a, b] = pairs[p];
    size_t base = L.plane_offset(p);
    for (int k = 0; k < 4; k++) {
      int di = k & 1, dj = k >> 1;
      st.plane_index[p][k] = base + (size_t(b.i0 + dj) * R + size_t(a.i0 + di)) * C;
      st.plane_weight[p][k] = (di ? a.t : 1 - a.t) * (dj ? b.t : 1 - b.t);
    }
  }
  const int G = L.cube_res, CC = L.cube_channels;
  auto cx = axis_weight(x.x(), G), cy = axis_weight(x.y(), G), cz = axis_weight(x.z(), G);
  for (int k = 0; k < 8; k++) {
    int di = k & 1, dj = (k >> 1) & 1, dk = k >> 2;
    st.cube_index[k] =
        L.cube_offset + ((size_t(cz.i0 + dk) * G + size_t(cy.i0 + dj)) * G + size_t(cx.i0 + di)) * CC;
    st.cube_weight[k] = (di ? cx.t : 1 - cx.t) * (dj ? cy.t : 1 - cy.t) * (dk ? cz.t : 1 - cz.t);
  }
  return st;
}

std::vector<double> grid_sample(const TriplaneCubeField& field, const vec3& x) {
  const auto& L = field.layout();
  std::vector<double> features(size_t(L.widths[0]));
  detail::gather_features(L, field.params().data(), grid_stencil(L, x), features.data());
  return features;
}

rgb decode(const TriplaneCubeField& field, const vec3& x) {
  auto features = grid_sample(field, x);
  return detail::mlp_forward(field.layout(), field.params().data(), features.data());
}

TriplaneCubeField init_field(const FieldConfig& config, std::uint64_t seed) {
  TriplaneCubeField field(config);
  const auto& L = field.layout();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto params = field.params();
  for (size_t i = 0; i < L.grid_count; i++) params[i] = float(config.init_std * gauss(rng));
  for (int l = 0; l < L.layers(); l++) {
    double bound = std::sqrt(6.0 / (L.widths[l] + L.widths[l + 1]));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (auto& w : field.weights(l)) w = float(uniform(rng));
  }
  return field;
}

namespace {
constexpr char tcf_magic[4] = {'T', 'C', 'F', '1'};
}

void save_field(const std::filesystem::path& path, const TriplaneCubeField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write field " + path.string());
  const auto& c = field.config();
  out.write(tcf_magic, 4);
  for (int v : {c.plane_res, c.plane_channels, c.cube_res, c.cube_channels, c.hidden, c.hidden_layers})
    binio::put(out, std::uint32_t(v));
  binio::put(out, std::uint64_t(field.params().size()));
  for (float v : field.params()) binio::put(out, v);
  if (!out) throw InputError("cannot write field " + path.string());
}

TriplaneCubeField load_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open field " + path.string());
  char magic[4] = {};
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, tcf_magic))
    throw InputError("bad magic in " + path.string());
  FieldConfig c;
  for (int* v : {&c.plane_res, &c.plane_channels, &c.cube_res, &c.cube_channels, &c.hidden, &c.hidden_layers})
    *v = int(binio::get<std::uint32_t>(in, "field config"));
  auto count = binio::get<std::uint64_t>(in, "parameter count");
  if (count != FieldLayout(c).total)
    throw InputError("parameter count " + std::to_string(count) + " does not match config in " + path.string());
  TriplaneCubeField field(c);
  for (auto& v : field.params()) v = binio::get<float>(in, "parameters");
  return field;
}

}  // namespace tfkit
