#pragma once

#include <string>

#include "tfkit/bake.hpp"
#include "tfkit/optim.hpp"

namespace tfkit {

// Dataset of points exactly on the surface (no offsets, no uniform points).
SamplingMix surface_only_mix();

struct AblationConfig {
  size_t samples = 200000;
  size_t probes = 50000;
  size_t psnr_samples = 100000;
  SamplingMix mix;
  float tau = default_tau;
  vec3f background = default_background;
  FieldConfig field;
  FitConfig fit;  // fit.seed seeds datasets, probes and initialization
};

struct AblationRun {
  std::string name;
  TriplaneCubeField field;
  std::vector<LossReport> history;
  double probe_mse = 0;           // all held-out off-surface probes
  double probe_mse_in_shell = 0;  // probes with distance <= tau
  double probe_mse_truncated = 0; // probes with distance > tau
  double psnr_uv = 0;
};

struct AblationReport {
  AblationRun volumetric;
  AblationRun surface;
  size_t probes_in_shell = 0;
  size_t probes_truncated = 0;

  bool probe_better() const { return volumetric.probe_mse <= surface.probe_mse; }
  bool psnr_within(double tolerance_db = 0.5) const {
    return volumetric.psnr_uv >= surface.psnr_uv - tolerance_db;
  }
};

// Fits one field on the volumetric TF dataset and one on a surface-only
// dataset with the same seed and step budget, then scores both on held-out
// probes drawn around the surface (labels from the truncated TF) and psnr_uv.
AblationReport run_ablation(const TriMesh& mesh, const AblationConfig& config);

std::string ablation_csv(const AblationReport& report);

}  // namespace tfkit
