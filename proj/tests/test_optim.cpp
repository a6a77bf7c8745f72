#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "tfkit/optim.hpp"
#include "tfkit/shapes.hpp"

using namespace tfkit;
using testing::TempDir;

namespace {

FieldConfig small_config() {
  FieldConfig c;
  c.plane_res = 8;
  c.plane_channels = 4;
  c.cube_res = 4;
  c.cube_channels = 4;
  c.hidden = 16;
  c.hidden_layers = 2;
  return c;
}

TfDataset constant_dataset(const vec3f& color, size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TfDataset ds;
  for (size_t i = 0; i < n; i++) {
    TfSample s;
    s.query = testing::random_point(rng).cast<float>();
    s.color = color;
    s.in_shell = true;
    ds.samples.push_back(s);
  }
  return ds;
}

TfDataset quad_dataset(size_t n, float tau = default_tau) {
  static const auto mesh = shapes::with_vertex_colors(shapes::quad(0.7, 0.0, rgb::Zero()), shapes::smooth_colors);
  static const auto bvh = build_bvh(mesh);
  return sample_tf_dataset(bvh, mesh, n, SamplingMix{}, tau, default_background, 3);
}

std::vector<double> as_double(const TriplaneCubeField& f) { return {f.params().begin(), f.params().end()}; }

}  // namespace

TEST_CASE("loss: perfect prediction has zero mse") {
  TriplaneCubeField field(small_config());  // all zero: decodes to 0.5 everywhere
  auto ds = constant_dataset(vec3f::Constant(0.5f), 1000, 1);
  auto r = loss(field, ds.samples);
  CHECK(r.mse == 0.0);
  CHECK(r.tv == 0.0);
  CHECK(r.total == 0.0);
  // stationary point: the gradient vanishes
  auto g = backward(field, ds.samples);
  double gmax = 0;
  for (double v : g) gmax = std::max(gmax, std::abs(v));
  CHECK(gmax < 1e-8);
}

TEST_CASE("TV: constant planes have zero value and zero gradient") {
  auto field = init_field(small_config(), 5);
  const auto& L = field.layout();
  for (size_t i = 0; i < L.cube_offset; i++) field.params()[i] = 0.3f + float(i % L.plane_channels);
  for (int l = 0; l < L.layers(); l++)
    for (auto& w : field.weights(l)) w = 0;
  auto ds = constant_dataset(vec3f::Constant(0.5f), 300, 2);
  auto p = as_double(field);
  for (int k = 0; k < 3; k++) {
    std::span<const double> plane(p.data() + L.plane_offset(k), L.plane_size);
    CHECK(plane_tv(plane, L.plane_res, L.plane_channels) == 0.0);
  }
  std::vector<double> g(L.total);
  auto r = evaluate_loss(L, p, ds.samples, {10.0, false}, g);
  CHECK(r.tv == 0.0);
  for (size_t i = 0; i < L.cube_offset; i++) CHECK(g[i] == 0.0);
}

TEST_CASE("plane_tv closed forms") {
  // 2x2, one channel, columns 0 and 1: two unit horizontal jumps over four pairs
  std::vector<double> p = {0, 1, 0, 1};
  CHECK(plane_tv(p, 2, 1) == 0.5);
  // ramp v = i along x on a 5x5 plane: 20 unit pairs out of 40
  std::vector<double> ramp;
  for (int j = 0; j < 5; j++)
    for (int i = 0; i < 5; i++) ramp.push_back(i);
  CHECK(plane_tv(ramp, 5, 1) == 0.5);
  CHECK_THROWS_AS(plane_tv(ramp, 4, 1), InputError);
}

TEST_CASE("gradcheck") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto r = tiny_gradcheck(seed);
    CHECK(r.parameters == FieldLayout(tiny_field_config()).total);
    CHECK(r.max_rel_error < 1e-3);
    auto rc = tiny_gradcheck(seed, 0.3, true);
    CHECK(rc.max_rel_error < 1e-3);
  }
}

TEST_CASE("gradient: independent finite differences on an MSE-only field") {
  auto field = init_field(small_config(), 9);
  for (auto& v : field.params().subspan(0, field.layout().grid_count)) v *= 40;
  auto ds = quad_dataset(64);
  auto p = as_double(field);
  const auto& L = field.layout();
  std::vector<double> g(L.total);
  evaluate_loss(L, p, ds.samples, {0.0, false}, g);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<size_t> pick(0, L.total - 1);
  for (int k = 0; k < 60; k++) {
    size_t i = pick(rng);
    auto q = p;
    const double h = 1e-5;
    q[i] = p[i] + h;
    double plus = evaluate_loss(L, q, ds.samples, {0.0, false}).total;
    q[i] = p[i] - h;
    double minus = evaluate_loss(L, q, ds.samples, {0.0, false}).total;
    double fd = (plus - minus) / (2 * h);
    CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(fd)) + 1e-9);
  }
}

TEST_CASE("fit: constant target is learned") {
  auto ds = constant_dataset(vec3f(1, 0, 0), 4096, 3);
  FitConfig cfg;
  cfg.steps = 200;
  cfg.batch = 1024;
  auto res = fit(init_field(FieldConfig{}, 1), ds, cfg);
  CHECK(res.history.size() == 200);
  CHECK(res.history.back().total < 1e-4);
  CHECK(res.history.back().total < res.history.front().total);
}

TEST_CASE("fit: loss identity, determinism and CSV") {
  auto ds = quad_dataset(4000);
  FitConfig cfg;
  cfg.steps = 40;
  cfg.batch = 512;
  cfg.lambda = 0.01;
  auto init = init_field(small_config(), 2);
  set_threads(1);
  auto a = fit(init, ds, cfg);
  set_threads(4);
  auto b = fit(init, ds, cfg);
  set_threads(0);
  CHECK(std::equal(a.field.params().begin(), a.field.params().end(), b.field.params().begin()));
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); i++) {
    const auto& h = a.history[i];
    CHECK(h.total == b.history[i].total);
    CHECK(std::abs(h.total - (h.mse + cfg.lambda * h.tv)) <= 1e-12);
    CHECK(h.lambda == cfg.lambda);
  }

  TempDir dir("optim");
  write_loss_csv(dir / "loss.csv", a.history, cfg);
  std::istringstream in(testing::read_text(dir / "loss.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line.find("lambda=0.01") != std::string::npos);
  std::getline(in, line);
  CHECK(line == "step,mse,tv,total");
  size_t rows = 0;
  while (std::getline(in, line)) {
    double step, mse, tv, total;
    char c;
    std::istringstream ls(line);
    ls >> step >> c >> mse >> c >> tv >> c >> total;
    CHECK(std::abs(total - (mse + cfg.lambda * tv)) <= 1e-12);
    rows++;
  }
  CHECK(rows == 40);
}

TEST_CASE("fit: stronger TV gives smoother planes") {
  auto ds = quad_dataset(4000);
  FitConfig cfg;
  cfg.steps = 150;
  cfg.batch = 1024;
  auto init = init_field(small_config(), 6);
  cfg.lambda = 0;
  auto loose = fit(init, ds, cfg);
  cfg.lambda = 10;
  auto tight = fit(init, ds, cfg);
  LossOptions measure{1.0, false};
  CHECK(loss(tight.field, ds.samples, measure).tv < loss(loose.field, ds.samples, measure).tv);
}

TEST_CASE("fit: truncation sends far queries to the background") {
  auto ds = quad_dataset(20000);
  FitConfig cfg;
  cfg.steps = 300;
  cfg.batch = 2048;
  auto res = fit(init_field(small_config(), 8), ds, cfg);
  double far_err = 0;
  int far = 0;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; i++) {
    vec3 x = testing::random_point(rng);
    if (std::abs(x.z()) < 0.3) continue;
    far++;
    far_err += (decode(res.field, x) - default_background.cast<double>()).squaredNorm() / 3;
  }
  CHECK(far > 100);
  CHECK(far_err / far < 0.01);
}

TEST_CASE("fit: divergence aborts with NumericalError") {
  auto ds = quad_dataset(2000);
  FitConfig cfg;
  cfg.steps = 50;
  cfg.batch = 256;
  cfg.lr_grid = 1e200;
  CHECK_THROWS_WITH_AS(fit(init_field(small_config(), 1), ds, cfg), doctest::Contains("non-finite"),
                       NumericalError);
}

TEST_CASE("FitConfig validation and loss errors") {
  FitConfig cfg;
  cfg.lr_grid = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = FitConfig{};
  cfg.beta1 = 1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = FitConfig{};
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  TriplaneCubeField field(small_config());
  CHECK_THROWS_AS(loss(field, {}), InputError);
  CHECK_THROWS_AS(fit(field, TfDataset{}, FitConfig{}), InputError);
}
