#include "tfkit/ablation.hpp"

#include <iomanip>
#include <sstream>

namespace tfkit {

SamplingMix surface_only_mix() { return {1.0, 0.0, 0.0, 0.0, 0.0}; }

namespace {

void score(AblationRun& run, const std::vector<TfSample>& probes) {
  double all = 0, shell = 0, outside = 0;
  size_t n_shell = 0, n_outside = 0;
  for (const auto& s : probes) {
    double e = (decode(run.field, s.query.cast<double>()) - s.color.cast<double>()).squaredNorm();
    all += e;
    if (s.in_shell) {
      shell += e;
      n_shell++;
    } else {
      outside += e;
      n_outside++;
    }
  }
  run.probe_mse = all / double(probes.size());
  run.probe_mse_in_shell = n_shell ? shell / double(n_shell) : 0.0;
  run.probe_mse_truncated = n_outside ? outside / double(n_outside) : 0.0;
}

}  // namespace

AblationReport run_ablation(const TriMesh& mesh, const AblationConfig& cfg) {
  auto bvh = build_bvh(mesh);
  const auto seed = cfg.fit.seed;
  SamplingMix probe_mix{0.5, 0.5, 0.0, cfg.mix.sigma_narrow, cfg.mix.sigma_wide};
  auto probes = sample_tf_dataset(bvh, mesh, cfg.probes, probe_mix, cfg.tau, cfg.background, seed ^ 0x5bd1e995ull);

  AblationReport report;
  for (const auto& s : probes.samples) (s.in_shell ? report.probes_in_shell : report.probes_truncated)++;

  auto init = init_field(cfg.field, seed);
  auto run = [&](AblationRun& out, const std::string& name, const SamplingMix& mix) {
    auto ds = sample_tf_dataset(bvh, mesh, cfg.samples, mix, cfg.tau, cfg.background, seed);
    auto result = fit(init, ds, cfg.fit);
    out.name = name;
    out.field = std::move(result.field);
    out.history = std::move(result.history);
    score(out, probes.samples);
    out.psnr_uv = psnr_uv(mesh, field_predictor(out.field), cfg.psnr_samples, seed + 1);
  };
  run(report.volumetric, "volumetric", cfg.mix);
  run(report.surface, "surface", surface_only_mix());
  return report;
}

std::string ablation_csv(const AblationReport& r) {
  std::ostringstream out;
  out << std::setprecision(9);
  out << "run,probe_mse,probe_mse_in_shell,probe_mse_truncated,psnr_uv\n";
  for (const auto* run : {&r.volumetric, &r.surface})
    out << run->name << "," << run->probe_mse << "," << run->probe_mse_in_shell << "," << run->probe_mse_truncated
        << "," << run->psnr_uv << "\n";
  out << "delta," << r.volumetric.probe_mse - r.surface.probe_mse << ","
      << r.volumetric.probe_mse_in_shell - r.surface.probe_mse_in_shell << ","
      << r.volumetric.probe_mse_truncated - r.surface.probe_mse_truncated << ","
      << r.volumetric.psnr_uv - r.surface.psnr_uv << "\n";
  out << "# probes in_shell=" << r.probes_in_shell << " truncated=" << r.probes_truncated << "\n";
  out << "# verdict probe_mse " << (r.probe_better() ? "volumetric<=surface" : "volumetric>surface")
      << ", psnr_uv " << (r.psnr_within() ? "within 0.5 dB" : "worse by more than 0.5 dB") << "\n";
  return out.str();
}

}  // namespace tfkit
