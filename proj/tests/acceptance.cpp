// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criterion numbers given as arguments restrict the run.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>

#include "helpers.hpp"
#include "tfkit/ablation.hpp"
#include "tfkit/bake.hpp"
#include "tfkit/optim.hpp"
#include "tfkit/raster.hpp"
#include "tfkit/reproject.hpp"
#include "tfkit/shapes.hpp"
#include "tfkit/spatial.hpp"
#include "tfkit/texfunc.hpp"

using namespace tfkit;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr float untruncated = std::numeric_limits<float>::infinity();

const TriMesh& textured_sphere() {
  static const TriMesh m = shapes::uv_sphere(0.8, 64, 32, 1024, 512);
  return m;
}

// 1: BVH closest point against brute force
Outcome spatial_oracle() {
  auto t0 = Clock::now();
  std::vector<std::pair<std::string, TriMesh>> meshes = {
      {"sphere", shapes::uv_sphere(0.8, 64, 32, 64, 32)},
      {"box", shapes::textured_box({0.7, 0.5, 0.6}, 64)},
      {"cup", shapes::cup(0.6, 0.45, 0.15, rgb(0.8, 0.3, 0.2))}};
  double worst = 0;
  size_t queries = 0;
  for (const auto& [name, m] : meshes) {
    if (m.faces.size() > 5000) return {false, name + " has more than 5k triangles"};
    auto bvh = build_bvh(m);
    std::mt19937_64 rng(1000 + queries);
    for (int i = 0; i < 10000; i++, queries++) {
      vec3 x = testing::random_point(rng, -1.2, 1.2);
      worst = std::max(worst, std::abs(closest_point(bvh, m, x).distance - brute_closest(m, x).distance));
    }
  }
  double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 5.0,
          fmt("%zu queries on 3 meshes, max |d_bvh - d_brute| = %.3g, %.2f s", queries, worst, t)};
}

// 2: truncated labels are exact
Outcome truncation_exactness() {
  const auto& m = textured_sphere();
  auto bvh = build_bvh(m);
  auto ds = sample_tf_dataset(bvh, m, 200000, SamplingMix{}, default_tau, default_background, 2);
  if (ds.tau != 0.025f) return {false, "dataset tau is not 0.025"};
  size_t outside = 0, bad_bg = 0, bad_color = 0;
  double worst = 0;
  std::vector<double> err(ds.samples.size(), 0.0);
  std::vector<char> bg_wrong(ds.samples.size(), 0);
  const long n = long(ds.samples.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (long i = 0; i < n; i++) {
    const auto& s = ds.samples[size_t(i)];
    auto oracle = brute_closest(m, s.query.cast<double>());
    if (float(oracle.distance) > ds.tau) {
      bg_wrong[size_t(i)] = !(s.color == ds.background) || s.in_shell;
    } else {
      rgb c = surface_color(m, oracle.face_id, oracle.bary);
      err[size_t(i)] = (s.color.cast<double>() - c).cwiseAbs().maxCoeff();
    }
  }
  for (long i = 0; i < n; i++) {
    const auto& s = ds.samples[size_t(i)];
    if (!s.in_shell) outside++;
    bad_bg += bg_wrong[size_t(i)];
    bad_color += err[size_t(i)] > 1e-6;
    worst = std::max(worst, err[size_t(i)]);
  }
  return {bad_bg == 0 && bad_color == 0,
          fmt("200000 samples, %zu truncated (%zu not background), max in-shell color error %.3g", outside, bad_bg,
              worst)};
}

// 3: analytic gradient against central differences
Outcome gradient_check() {
  auto t0 = Clock::now();
  auto r = tiny_gradcheck(1);
  auto rc = tiny_gradcheck(2, 0.05, true);
  double t = seconds_since(t0);
  double worst = std::max(r.max_rel_error, rc.max_rel_error);
  return {worst < 1e-3 && t < 60,
          fmt("%zu parameters, h = 1e-4, max relative error %.3g, %.2f s", r.parameters, worst, t)};
}

struct SphereFit {
  FitResult result;
  FitConfig config;
  double seconds;
  double psnr;
};

const SphereFit& sphere_fit() {
  static const SphereFit fit_once = [] {
    const auto& m = textured_sphere();
    auto bvh = build_bvh(m);
    auto ds = sample_tf_dataset(bvh, m, 200000, SamplingMix{}, default_tau, default_background, 5);
    FitConfig cfg;  // 2000 steps, lambda 5e-4
    auto t0 = Clock::now();
    auto res = fit(init_field(FieldConfig{}, 1), ds, cfg);
    double t = seconds_since(t0);
    double p = psnr_uv(m, field_predictor(res.field), 100000, 11);
    return SphereFit{std::move(res), cfg, t, p};
  }();
  return fit_once;
}

// 4: logged total equals mse + lambda tv; constant plane has zero TV
Outcome loss_identity() {
  const auto& f = sphere_fit();
  double worst = 0;
  bool lambda_ok = f.config.lambda == 5e-4;
  for (const auto& h : f.result.history) {
    worst = std::max(worst, std::abs(h.total - (h.mse + 5e-4 * h.tv)));
    lambda_ok &= h.lambda == 5e-4;
  }
  testing::TempDir dir("acceptance");
  write_loss_csv(dir / "loss.csv", f.result.history, f.config);
  std::istringstream in(testing::read_text(dir / "loss.csv"));
  std::string line;
  std::getline(in, line);
  lambda_ok &= line.find("lambda=0.0005") != std::string::npos;
  std::getline(in, line);
  size_t rows = 0;
  while (std::getline(in, line)) {
    double step, mse, tv, total;
    char c;
    std::istringstream ls(line);
    ls >> step >> c >> mse >> c >> tv >> c >> total;
    worst = std::max(worst, std::abs(total - (mse + 5e-4 * tv)));
    rows++;
  }
  std::vector<double> plane(32 * 32 * 16, 0.37);
  double tv = plane_tv(plane, 32, 16);
  return {worst <= 1e-12 && lambda_ok && rows == f.result.history.size() && tv == 0.0,
          fmt("%zu steps (history and CSV), max |total - (mse + 5e-4 tv)| = %.3g, constant-plane TV = %g", rows,
              worst, tv)};
}

// 5: default field fits a textured sphere
Outcome fit_convergence() {
  const auto& f = sphere_fit();
  FieldLayout L(FieldConfig{});
  bool shape = L.plane_res == 32 && L.cube_res == 8;
  return {shape && f.psnr >= 30 && f.seconds < 300 && f.result.history.size() == 2000,
          fmt("32^2 planes, 8^3 cube, 2000 steps: psnr_uv %.2f dB in %.1f s", f.psnr, f.seconds)};
}

// 6: volumetric vs surface-only supervision
Outcome ablation_direction() {
  AblationConfig cfg;
  auto t0 = Clock::now();
  auto r = run_ablation(textured_sphere(), cfg);
  double t = seconds_since(t0);
  bool probes = r.probe_better(), psnr = r.psnr_within(0.5);
  return {probes && psnr,
          fmt("probe mse volumetric %.4g vs surface %.4g (%s); psnr_uv volumetric %.2f vs surface %.2f dB (%s); "
              "in-shell probe mse %.4g vs %.4g; %.0f s",
              r.volumetric.probe_mse, r.surface.probe_mse, probes ? "ok" : "worse", r.volumetric.psnr_uv,
              r.surface.psnr_uv, psnr ? "ok" : "more than 0.5 dB worse", r.volumetric.probe_mse_in_shell,
              r.surface.probe_mse_in_shell, t)};
}

// 7: render, reproject and bake round trips
Outcome round_trip() {
  const auto& m = textured_sphere();
  auto cams = six_views(512);
  ViewSet views;
  for (const auto& cam : cams) {
    auto out = render(m, cam, render_color | render_depth | render_mask);
    views.push_back({cam, out.color, out.depth, out.mask});
  }
  auto samples = sample_surface(m, 200000, 8);
  auto partial = reproject(views, sample_targets(samples));
  double se = 0;
  for (size_t i = 0; i < samples.size(); i++) se += (partial.colors[i] - samples[i].color).squaredNorm() / 3;
  double reproj_psnr = psnr_from_mse(se / double(samples.size()));

  auto bvh = build_bvh(m);
  auto baked = bake(m, tf_predictor(bvh, m, untruncated), {BakeMode::uv_texture, 1024, 2});
  testing::TempDir dir("acceptance");
  save_mesh(dir / "baked.obj", apply_bake(m, baked));  // texture goes through 8-bit PNG
  auto reloaded = load_mesh(dir / "baked.obj");
  double bake_psnr = psnr_uv(reloaded, tf_predictor(bvh, m, untruncated), 100000, 9);
  double valid = partial.valid_fraction();
  return {valid == 1.0 && reproj_psnr >= 30 && bake_psnr >= 46,
          fmt("valid %.4f%% of %zu targets, reprojected psnr_uv %.2f dB, 1024^2 bake psnr_uv %.2f dB", 100 * valid,
              partial.size(), reproj_psnr, bake_psnr)};
}

// 8: tiled rasterizer equals the per-pixel reference
Outcome raster_equivalence() {
  std::vector<TriMesh> meshes = {shapes::uv_sphere(0.8, 20, 12, 64, 32), shapes::textured_box({0.7, 0.5, 0.6}, 64),
                                 shapes::cup(0.6, 0.45, 0.15, rgb(0.8, 0.3, 0.2)),
                                 shapes::with_vertex_colors(shapes::uv_sphere(0.6, 16, 10, 8, 4), shapes::smooth_colors)};
  std::vector<OrthoCamera> cams = six_views(160);
  OrthoCamera odd;
  odd.view_dir = vec3(0.3, -0.5, -0.8).normalized();
  odd.up = (vec3(0, 1, 0) - odd.view_dir.dot(vec3(0, 1, 0)) * odd.view_dir).normalized();
  odd.width = 203;
  odd.height = 117;
  odd.half_extent = 1.2;
  cams.push_back(odd);
  size_t renders = 0, mismatched = 0;
  double worst = 0;
  for (const auto& m : meshes) {
    if (m.faces.size() > 500) return {false, "fixture has more than 500 triangles"};
    for (const auto& cam : cams) {
      auto ref = render_reference(m, cam);
      auto out = render(m, cam);
      renders++;
      if (!(out.depth == ref.depth) || !(out.mask == ref.mask)) mismatched++;
      for (auto [a, b] : {std::pair{&out.color, &ref.color}, {&out.normal, &ref.normal}, {&out.ccm, &ref.ccm}})
        for (size_t i = 0; i < a->pixels.size(); i++)
          worst = std::max(worst, double(std::abs(a->pixels[i] - b->pixels[i])));
    }
  }
  return {mismatched == 0 && worst <= 1e-6,
          fmt("%zu renders, %zu with depth/mask differences, max attribute difference %.3g", renders, mismatched,
              worst)};
}

// 9: every CLI command reproduces its artifacts byte for byte
int run_cli(const fs::path& dir, const std::string& args, std::string& transcript) {
  auto out = dir / "cli_stdout.txt";
  std::string cmd = "cd '" + dir.string() + "' && '" TFKIT_CLI "' " + args + " --threads 1 > '" + out.string() +
                    "' 2>&1";
  int status = std::system(cmd.c_str());
  transcript += "$ " + args + "\n" + testing::read_text(out);
  fs::remove(out);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const std::vector<std::string> pipeline = {
      "fixture sphere raw.obj --tex-res 128",
      "normalize raw.obj mesh.obj",
      "normalize mesh.obj restored.obj --invert mesh.transform",
      "sample-tf mesh.obj data/tf.tfds --n 20000 --seed 4",
      "render mesh.obj views --res 128",
      "reproject mesh.obj views partial/points.ply --targets 5000",
      "reproject mesh.obj views partial/texels.png --uv-res 128",
      "fit data/tf.tfds fit/field.tcf --steps 30 --batch 1024 --plane-res 16 --plane-channels 8 --cube-res 4 "
      "--cube-channels 4 --hidden 32",
      "gradcheck --seed 3",
      "bake mesh.obj fit/field.tcf bake_uv/mesh.obj --mode uv:128 --blend partial/texels.png",
      "bake mesh.obj fit/field.tcf bake_vc/mesh.ply --mode vertex --blend partial/points.ply",
      "eval mesh.obj fit/field.tcf --n 5000 --view-res 64 --out eval/metrics.csv",
      "ablate mesh.obj ablation --n 5000 --probes 1000 --psnr-samples 2000 --steps 10 --batch 512"};
  testing::TempDir a("accept_a"), b("accept_b");
  std::string ta, tb;
  for (const auto& cmd : pipeline) {
    int ca = run_cli(a.path(), cmd, ta), cb = run_cli(b.path(), cmd, tb);
    if (ca != 0 || cb != 0) return {false, "command failed: " + cmd + " (exit " + std::to_string(ca) + ")"};
  }
  std::set<fs::path> files;
  for (const auto* root : {&a, &b})
    for (const auto& e : fs::recursive_directory_iterator(root->path()))
      if (e.is_regular_file()) files.insert(fs::relative(e.path(), root->path()));
  size_t differing = 0;
  std::string first;
  for (const auto& f : files) {
    auto pa = a.path() / f, pb = b.path() / f;
    if (!fs::exists(pa) || !fs::exists(pb) || testing::read_text(pa) != testing::read_text(pb)) {
      if (differing++ == 0) first = f.string();
    }
  }
  bool same_stdout = ta == tb;
  return {differing == 0 && same_stdout && files.size() > 30,
          fmt("%zu commands, %zu artifacts compared, %zu differ%s%s, stdout %s", pipeline.size(), files.size(),
              differing, differing ? " e.g. " : "", first.c_str(), same_stdout ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"spatial oracle equivalence", spatial_oracle},
      {"TF truncation exactness", truncation_exactness},
      {"gradient correctness", gradient_check},
      {"loss identity and lambda", loss_identity},
      {"fit convergence", fit_convergence},
      {"ablation direction", ablation_direction},
      {"round-trip pipeline", round_trip},
      {"rasterizer reference equivalence", raster_equivalence},
      {"determinism", determinism}};
  std::set<size_t> only;
  for (int i = 1; i < argc; i++) only.insert(std::strtoul(argv[i], nullptr, 10));
  int failures = 0, ran = 0;
  for (size_t i = 0; i < criteria.size(); i++) {
    if (!only.empty() && !only.count(i + 1)) continue;
    ran++;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] criterion %zu: %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
