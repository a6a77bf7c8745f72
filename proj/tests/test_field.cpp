#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "tfkit/field.hpp"

using namespace tfkit;
using testing::TempDir;

namespace {

FieldConfig small_config() {
  FieldConfig c;
  c.plane_res = 5;
  c.plane_channels = 2;
  c.cube_res = 3;
  c.cube_channels = 2;
  c.hidden = 8;
  c.hidden_layers = 2;
  return c;
}

double node_coord(int i, int res) { return -1.0 + 2.0 * i / (res - 1); }

// plane and cube features written as f(node indices) so expected samples are
// known in closed form
void fill_grids(TriplaneCubeField& field, double (*plane_fn)(int, int, int, int),
                double (*cube_fn)(int, int, int, int)) {
  const auto& L = field.layout();
  for (int p = 0; p < 3; p++) {
    auto plane = field.plane(p);
    for (int j = 0; j < L.plane_res; j++)
      for (int i = 0; i < L.plane_res; i++)
        for (int c = 0; c < L.plane_channels; c++)
          plane[(size_t(j) * L.plane_res + i) * L.plane_channels + c] = float(plane_fn(p, i, j, c));
  }
  auto cube = field.cube();
  for (int k = 0; k < L.cube_res; k++)
    for (int j = 0; j < L.cube_res; j++)
      for (int i = 0; i < L.cube_res; i++)
        for (int c = 0; c < L.cube_channels; c++)
          cube[((size_t(k) * L.cube_res + j) * L.cube_res + i) * L.cube_channels + c] = float(cube_fn(i, j, k, c));
}

double plane_id(int p, int i, int j, int c) { return 100 * p + 10 * j + i + 0.5 * c; }
double cube_id(int i, int j, int k, int c) { return 100 * k + 10 * j + i - 0.25 * c; }
// linear in the node index, hence linear in world coordinates
double plane_ramp(int p, int i, int j, int c) { return (p + 1) * i - 0.5 * j + c; }
double cube_ramp(int i, int j, int k, int c) { return i + 2 * j - k + c; }

}  // namespace

TEST_CASE("layout") {
  FieldConfig c;
  FieldLayout L(c);
  CHECK(L.plane_size == 32u * 32 * 16);
  CHECK(L.cube_size == 8u * 8 * 8 * 8);
  CHECK(L.widths == std::vector<int>{56, 64, 64, 3});
  CHECK(L.total == L.grid_count + (56 * 64 + 64) + (64 * 64 + 64) + (64 * 3 + 3));
  c.mlp_input = 40;
  CHECK_THROWS_WITH_AS(FieldLayout{c}, doctest::Contains("does not match"), InputError);
  c = FieldConfig{};
  c.plane_res = 1;
  CHECK_THROWS_AS(FieldLayout{c}, InputError);
}

TEST_CASE("grid_sample at a node returns the stored features") {
  TriplaneCubeField field(small_config());
  fill_grids(field, plane_id, cube_id);
  const auto& L = field.layout();
  // choose x on both a plane node and a cube node: plane res 5, cube res 3
  for (int xi : {0, 2, 4})
    for (int yi : {0, 2, 4})
      for (int zi : {0, 2, 4}) {
        vec3 x(node_coord(xi, 5), node_coord(yi, 5), node_coord(zi, 5));
        auto f = grid_sample(field, x);
        const std::array<std::pair<int, int>, 3> ij = {{{xi, yi}, {xi, zi}, {yi, zi}}};
        for (int p = 0; p < 3; p++)
          for (int c = 0; c < L.plane_channels; c++)
            CHECK(f[size_t(p * L.plane_channels + c)] == plane_id(p, ij[p].first, ij[p].second, c));
        for (int c = 0; c < L.cube_channels; c++)
          CHECK(f[size_t(3 * L.plane_channels + c)] == cube_id(xi / 2, yi / 2, zi / 2, c));
      }
}

TEST_CASE("grid_sample reproduces linear ramps exactly and clamps outside the box") {
  TriplaneCubeField field(small_config());
  fill_grids(field, plane_ramp, cube_ramp);
  auto expected = [](const vec3& xin) {
    vec3 x = xin.cwiseMax(-1.0).cwiseMin(1.0);
    vec3 u5 = (x.array() + 1) * 0.5 * 4, u3 = (x.array() + 1) * 0.5 * 2;
    std::vector<double> f;
    const std::array<std::pair<int, int>, 3> ax = {{{0, 1}, {0, 2}, {1, 2}}};
    for (int p = 0; p < 3; p++)
      for (int c = 0; c < 2; c++) f.push_back((p + 1) * u5[ax[p].first] - 0.5 * u5[ax[p].second] + c);
    for (int c = 0; c < 2; c++) f.push_back(u3.x() + 2 * u3.y() - u3.z() + c);
    return f;
  };
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; i++) {
    vec3 x = testing::random_point(rng, -1.5, 1.5);
    auto f = grid_sample(field, x);
    auto e = expected(x);
    for (size_t k = 0; k < f.size(); k++) CHECK(std::abs(f[k] - e[k]) < 1e-9);
  }
  // midpoint between two plane nodes
  vec3 mid(0.5 * (node_coord(1, 5) + node_coord(2, 5)), node_coord(3, 5), node_coord(0, 5));
  CHECK(std::abs(grid_sample(field, mid)[0] - (1.5 - 1.5)) < 1e-12);
}

TEST_CASE("constant grids give constant features") {
  TriplaneCubeField field(small_config());
  fill_grids(field, [](int, int, int, int c) { return 0.25 + c; }, [](int, int, int, int c) { return -1.0 + c; });
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; i++) {
    auto f = grid_sample(field, testing::random_point(rng));
    for (int p = 0; p < 3; p++) {
      CHECK(std::abs(f[size_t(2 * p)] - 0.25) < 1e-12);
      CHECK(std::abs(f[size_t(2 * p + 1)] - 1.25) < 1e-12);
    }
    CHECK(std::abs(f[6] + 1.0) < 1e-12);
    CHECK(std::abs(f[7]) < 1e-12);
  }
}

TEST_CASE("grid_stencil weights are a partition of unity") {
  FieldLayout L(FieldConfig{});
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; i++) {
    auto st = grid_stencil(L, testing::random_point(rng, -1.2, 1.2));
    for (int p = 0; p < 3; p++) {
      double s = 0;
      for (double w : st.plane_weight[p]) {
        CHECK(w >= 0);
        s += w;
      }
      CHECK(std::abs(s - 1) < 1e-12);
    }
    double s = 0;
    for (double w : st.cube_weight) s += w;
    CHECK(std::abs(s - 1) < 1e-12);
    for (size_t idx : st.cube_index) CHECK(idx + L.cube_channels <= L.grid_count);
  }
}

TEST_CASE("decode") {
  SUBCASE("all-zero parameters decode to 0.5") {
    TriplaneCubeField field(small_config());
    CHECK(decode(field, vec3(0.3, -0.2, 0.9)) == rgb::Constant(0.5));
  }
  SUBCASE("output stays inside (0, 1) and is continuous") {
    auto field = init_field(FieldConfig{}, 3);
    for (auto& v : field.params().subspan(0, field.layout().grid_count)) v *= 300;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 300; i++) {
      vec3 x = testing::random_point(rng);
      rgb c = decode(field, x);
      CHECK((c.array() > 0).all());
      CHECK((c.array() < 1).all());
      rgb near = decode(field, x + vec3::Constant(1e-7));
      CHECK((c - near).cwiseAbs().maxCoeff() < 1e-3);
    }
  }
  SUBCASE("freshly initialized fields decode near gray") {
    auto field = init_field(FieldConfig{}, 42);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 300; i++) {
      rgb c = decode(field, testing::random_point(rng));
      CHECK((c.array() - 0.5).abs().maxCoeff() <= 0.15);
    }
  }
}

TEST_CASE("init_field") {
  auto a = init_field(FieldConfig{}, 11), b = init_field(FieldConfig{}, 11), c = init_field(FieldConfig{}, 12);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  CHECK_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
  const auto& L = a.layout();
  double sum = 0, sq = 0;
  for (size_t i = 0; i < L.grid_count; i++) {
    sum += a.params()[i];
    sq += double(a.params()[i]) * a.params()[i];
  }
  double n = double(L.grid_count);
  double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(std::abs(sd - 0.01) < 0.0005);
  for (int l = 0; l < L.layers(); l++) {
    double bound = std::sqrt(6.0 / (L.widths[l] + L.widths[l + 1]));
    for (float w : a.weights(l)) CHECK(std::abs(w) <= bound);
    for (float v : a.bias(l)) CHECK(v == 0.0f);
  }
  CHECK(a.all_finite());
  a.params()[5] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("TCF files") {
  TempDir dir("field");
  auto field = init_field(small_config(), 4);
  save_field(dir / "f.tcf", field);
  auto back = load_field(dir / "f.tcf");
  CHECK(back.config() == field.config());
  CHECK(std::equal(field.params().begin(), field.params().end(), back.params().begin(), back.params().end()));
  CHECK(std::filesystem::file_size(dir / "f.tcf") == 4 + 6 * 4 + 8 + 4 * field.params().size());

  auto bytes = testing::read_text(dir / "f.tcf");
  auto bad = bytes;
  bad[1] = 'X';
  testing::write_text(dir / "magic.tcf", bad);
  CHECK_THROWS_WITH_AS(load_field(dir / "magic.tcf"), doctest::Contains("bad magic"), InputError);
  bad = bytes;
  bad[4] = 6;  // plane_res 5 -> 6
  testing::write_text(dir / "count.tcf", bad);
  CHECK_THROWS_WITH_AS(load_field(dir / "count.tcf"), doctest::Contains("does not match"), InputError);
  testing::write_text(dir / "short.tcf", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_field(dir / "short.tcf"), InputError);
  CHECK_THROWS_AS(load_field(dir / "missing.tcf"), InputError);
}
