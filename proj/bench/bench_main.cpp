// Parallel kernels against their serial references. Thread-count arguments
// above the machine's core count only measure scheduling overhead.

#include <benchmark/benchmark.h>

#include <random>

#include "tfkit/optim.hpp"
#include "tfkit/raster.hpp"
#include "tfkit/shapes.hpp"
#include "tfkit/spatial.hpp"
#include "tfkit/texfunc.hpp"

using namespace tfkit;

namespace {

const TriMesh& sphere() {
  static const TriMesh m = shapes::uv_sphere(0.8, 64, 32, 256, 128);
  return m;
}

const Bvh& sphere_bvh() {
  static const Bvh b = build_bvh(sphere());
  return b;
}

std::vector<vec3> query_points(size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<vec3> pts(n);
  for (auto& p : pts) p = vec3(u(rng), u(rng), u(rng));
  return pts;
}

void BM_ClosestBrute(benchmark::State& state) {
  auto pts = query_points(200);
  for (auto _ : state)
    for (const auto& p : pts) benchmark::DoNotOptimize(brute_closest(sphere(), p));
  state.SetItemsProcessed(state.iterations() * int64_t(pts.size()));
}
BENCHMARK(BM_ClosestBrute)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_ClosestBvh(benchmark::State& state) {
  auto pts = query_points(20000);
  set_threads(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(closest_points(sphere_bvh(), sphere(), pts));
  set_threads(0);
  state.SetItemsProcessed(state.iterations() * int64_t(pts.size()));
}
BENCHMARK(BM_ClosestBvh)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_BuildBvh(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_bvh(sphere()));
}
BENCHMARK(BM_BuildBvh)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_RenderReference(benchmark::State& state) {
  auto mesh = shapes::uv_sphere(0.8, 20, 12, 64, 32);
  auto cam = six_views(int(state.range(0)))[4];
  for (auto _ : state) benchmark::DoNotOptimize(render_reference(mesh, cam));
}
BENCHMARK(BM_RenderReference)->Arg(128)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_RenderTiled(benchmark::State& state) {
  auto mesh = shapes::uv_sphere(0.8, 20, 12, 64, 32);
  auto cam = six_views(int(state.range(0)))[4];
  set_threads(int(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(render(mesh, cam));
  set_threads(0);
}
BENCHMARK(BM_RenderTiled)->Args({128, 1})->Args({512, 1})->Args({512, 4})->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_TfLabel(benchmark::State& state) {
  auto pts = draw_tf_points(sphere(), 50000, SamplingMix{}, 3);
  set_threads(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tf_query_batch(sphere_bvh(), sphere(), pts, default_tau));
  set_threads(0);
  state.SetItemsProcessed(state.iterations() * int64_t(pts.size()));
}
BENCHMARK(BM_TfLabel)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_LossGradient(benchmark::State& state) {
  auto ds = sample_tf_dataset(sphere_bvh(), sphere(), 4096, SamplingMix{}, default_tau, default_background, 4);
  auto field = init_field(FieldConfig{}, 1);
  std::vector<double> params(field.params().begin(), field.params().end());
  std::vector<double> grad(params.size());
  set_threads(int(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(evaluate_loss(field.layout(), params, ds.samples, LossOptions{}, grad));
  set_threads(0);
  state.SetItemsProcessed(state.iterations() * int64_t(ds.samples.size()));
}
BENCHMARK(BM_LossGradient)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace
BENCHMARK_MAIN();
