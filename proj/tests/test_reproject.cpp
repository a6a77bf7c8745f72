#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "tfkit/bake.hpp"
#include "tfkit/reproject.hpp"
#include "tfkit/shapes.hpp"

using namespace tfkit;
using testing::TempDir;

namespace {

ViewSet render_views(const TriMesh& mesh, int res, const std::vector<int>& keep = {0, 1, 2, 3, 4, 5}) {
  auto cams = six_views(res);
  ViewSet views;
  for (int i : keep) {
    auto out = render(mesh, cams[size_t(i)], render_color | render_depth | render_mask);
    views.push_back({cams[size_t(i)], out.color, out.depth, out.mask});
  }
  return views;
}

double psnr_of(const std::vector<rgb>& a, const std::vector<rgb>& b) {
  double se = 0;
  for (size_t i = 0; i < a.size(); i++) se += (a[i] - b[i]).squaredNorm() / 3;
  return 10 * std::log10(1.0 / (se / double(a.size())));
}

PartialTexture synthetic_partial(size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  PartialTexture p;
  for (size_t i = 0; i < n; i++) {
    p.positions.push_back(testing::random_point(rng));
    p.normals.push_back(vec3(0, 0, 1));
    p.colors.push_back(rgb(u(rng), u(rng), u(rng)));
    p.weights.push_back(u(rng) * 2);
    p.valid.push_back(p.weights.back() >= p.w_min);
  }
  return p;
}

}  // namespace

TEST_CASE("reproject: six views see every point of a sphere") {
  auto sphere = shapes::uv_sphere(0.8, 64, 32, 128, 64);
  auto views = render_views(sphere, 512);
  auto samples = sample_surface(sphere, 20000, 6);
  auto partial = reproject(views, sample_targets(samples));
  CHECK(partial.valid_fraction() == 1.0);
  std::vector<rgb> truth;
  for (const auto& s : samples) truth.push_back(s.color);
  CHECK(psnr_of(partial.colors, truth) >= 30.0);
  for (size_t i = 0; i < partial.size(); i++) {
    CHECK(partial.weights[i] >= partial.w_min);
    CHECK((partial.colors[i].array() >= -1e-12).all());
    CHECK((partial.colors[i].array() <= 1 + 1e-12).all());
  }
}

TEST_CASE("reproject: occluded cavity wall gets no weight") {
  auto cup = shapes::cup(0.6, 0.45, 0.25, rgb(0.7, 0.2, 0.1));
  std::vector<int> no_top = {0, 1, 3, 4, 5};  // drop the view looking down -Y
  auto views = render_views(cup, 256, no_top);
  vec3 inner(-0.45, 0.0, 0.05), inner_n(1, 0, 0);
  vec3 outer(0.6, 0.0, 0.05), outer_n(1, 0, 0);
  rgb c;
  double w = -1;
  // view 0 looks along -X: faces the inner wall but the outer wall is in front
  CHECK_FALSE(view_contribution(views[0], inner, inner_n, {}, c, w));
  CHECK(view_contribution(views[0], outer, outer_n, {}, c, w));
  CHECK(w == doctest::Approx(1.0));
  CHECK((c - rgb(0.7, 0.2, 0.1)).norm() < 1.0 / 255);
  auto partial = reproject(views, {{inner, inner_n}, {outer, outer_n}});
  CHECK(partial.weights[0] == 0.0);
  CHECK_FALSE(partial.valid[0]);
  CHECK(partial.valid[1]);
}

TEST_CASE("view_contribution: back-facing and out-of-frame points") {
  auto quad = shapes::quad(0.5, 0.0, rgb(0.1, 0.6, 0.3));
  auto views = render_views(quad, 128, {4});
  rgb c;
  double w;
  CHECK_FALSE(view_contribution(views[0], vec3(0, 0, 0), vec3(0, 0, -1), {}, c, w));
  CHECK_FALSE(view_contribution(views[0], vec3(1.5, 0, 0), vec3(0, 0, 1), {}, c, w));
  CHECK_FALSE(view_contribution(views[0], vec3(0.1, 0.1, -0.3), vec3(0, 0, 1), {}, c, w));
  CHECK(view_contribution(views[0], vec3(0, 0, 0), vec3(0, 0, 1), {}, c, w));
  CHECK(w == 1.0);
  CHECK((c - rgb(0.1, 0.6, 0.3)).norm() < 1e-6);
  ReprojectOptions o;
  o.power = 2;
  CHECK(view_contribution(views[0], vec3(0.1, 0.1, 0), vec3(0.6, 0, 0.8), o, c, w));
  CHECK(w == doctest::Approx(0.64).epsilon(1e-12));
}

TEST_CASE("reproject: errors") {
  CHECK_THROWS_AS(reproject({}, {{vec3::Zero(), vec3(0, 0, 1)}}), InputError);
  TempDir dir("reproject");
  auto sphere = shapes::uv_sphere(0.8, 16, 8, 16, 8);
  auto cams = six_views(32);
  write_rig(dir / "rig.txt", cams);
  for (size_t i = 0; i < cams.size(); i++)
    write_render(dir.path(), i, render(sphere, cams[i]), render_color | render_mask | (i == 3 ? 0u : render_depth));
  CHECK_THROWS_WITH_AS(read_views(dir.path()), doctest::Contains("missing depth"), InputError);
  write_render(dir.path(), 3, render(sphere, cams[3]), render_depth);
  CHECK(read_views(dir.path()).size() == 6);
}

TEST_CASE("reproject_uv covers every chart texel of a sphere") {
  auto sphere = shapes::uv_sphere(0.8, 64, 32, 64, 32);
  auto views = render_views(sphere, 256);
  auto partial = reproject_uv(sphere, views, 128, 64);
  auto cov = rasterize_uv(sphere, 128, 64);
  size_t covered = 0;
  for (int f : cov.face) covered += f >= 0;
  CHECK(partial.size() == covered);
  CHECK(partial.valid_fraction() >= 0.999);
  TempDir dir("reproject");
  write_partial_texture(dir / "p.png", dir / "p_weight.pfm", partial);
  auto w = read_pfm(dir / "p_weight.pfm");
  CHECK(w.channels == 1);
  CHECK(w.pixels[size_t(partial.texel_index[7])] == float(partial.weights[7]));
}

TEST_CASE("blend") {
  auto partial = synthetic_partial(500, 3);
  partial.valid[0] = false;
  auto predictor = [](const vec3& p) { return rgb(0.5 + 0.4 * p.x(), 0.2, 0.9); };

  SUBCASE("alpha = 1 returns the partial colors") {
    BlendOptions o{1e-9, 1};
    auto out = blend(partial, predictor, o);
    for (size_t i = 1; i < partial.size(); i++)
      if (partial.valid[i]) CHECK(out[i] == partial.colors[i]);
    CHECK(out[0] == predictor(partial.positions[0]));
  }
  SUBCASE("zero weights return the predictor") {
    for (auto& w : partial.weights) w = 0;
    auto out = blend(partial, predictor);
    for (size_t i = 0; i < partial.size(); i++) CHECK(out[i] == predictor(partial.positions[i]));
  }
  SUBCASE("alpha = 0.5") {
    CHECK(blend_alpha(0.5, true, {1, 1}) == 0.5);
    CHECK(blend_alpha(0.25, true, {1, 0.5}) == 0.5);
    CHECK(blend_alpha(3, false, {1, 1}) == 0);
  }
  SUBCASE("convex combination, monotone in the weight") {
    auto out = blend(partial, predictor);
    for (size_t i = 0; i < partial.size(); i++) {
      rgb lo = partial.colors[i].cwiseMin(predictor(partial.positions[i]));
      rgb hi = partial.colors[i].cwiseMax(predictor(partial.positions[i]));
      CHECK((out[i].array() >= lo.array() - 1e-12).all());
      CHECK((out[i].array() <= hi.array() + 1e-12).all());
    }
    double prev = -1;
    for (double w = 0; w <= 2; w += 0.05) {
      double a = blend_alpha(w, true, {1.3, 2});
      CHECK(a >= prev);
      prev = a;
    }
  }
}

TEST_CASE("partial PLY round trip") {
  TempDir dir("reproject");
  auto p = synthetic_partial(300, 8);
  write_partial_ply(dir / "p.ply", p);
  auto r = read_partial_ply(dir / "p.ply", p.w_min);
  REQUIRE(r.size() == p.size());
  for (size_t i = 0; i < p.size(); i++) {
    CHECK((r.positions[i] - p.positions[i]).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((r.colors[i] - p.colors[i]).cwiseAbs().maxCoeff() <= 0.5 / 255 + 1e-12);
    CHECK(r.weights[i] == double(float(p.weights[i])));
    CHECK(r.valid[i] == (float(p.weights[i]) >= p.w_min));
  }
  testing::write_text(dir / "ascii.ply", "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_AS(read_partial_ply(dir / "ascii.ply", 0.05), InputError);
}

TEST_CASE("PartialLookup matches a brute-force nearest search") {
  auto p = synthetic_partial(2000, 12);
  const double radius = 0.1;
  PartialLookup lookup(p, radius);
  std::mt19937_64 rng(13);
  for (int q = 0; q < 2000; q++) {
    vec3 x = testing::random_point(rng, -1.1, 1.1);
    int best = -1;
    double best_d = radius * radius;
    for (size_t i = 0; i < p.size(); i++) {
      double d = (p.positions[i] - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = int(i);
      }
    }
    CHECK(lookup.nearest(x) == best);
  }
  CHECK_THROWS_AS(PartialLookup(p, 0.0), InputError);
}
