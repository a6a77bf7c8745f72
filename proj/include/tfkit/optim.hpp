#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tfkit/field.hpp"
#include "tfkit/texfunc.hpp"

namespace tfkit {

constexpr double default_lambda = 5e-4;

struct LossReport {
  double mse = 0;
  double tv = 0;
  double total = 0;
  double lambda = 0;
};

struct LossOptions {
  double lambda = default_lambda;
  bool tv_include_cube = false;
};

// Loss and gradient evaluated on f64 parameters laid out per FieldLayout.
// mse is the batch mean of ||decode(x) - c*||^2; tv is the mean squared
// difference over adjacent texel pairs (both in-plane axes, every channel)
// of the three planes, plus the cube when requested.
LossReport evaluate_loss(const FieldLayout& layout, std::span<const double> params, std::span<const TfSample> batch,
                         const LossOptions& opt, std::span<double> gradient = {});

// TV term of a single R x R x C plane.
double plane_tv(std::span<const double> plane, int res, int channels);

LossReport loss(const TriplaneCubeField& field, std::span<const TfSample> batch, const LossOptions& opt = {});

// d(total)/d(parameter), same layout as field.params().
std::vector<double> backward(const TriplaneCubeField& field, std::span<const TfSample> batch,
                             const LossOptions& opt = {});

struct FitConfig {
  double lambda = default_lambda;
  bool tv_include_cube = false;
  int steps = 2000;
  int batch = 4096;
  double lr_grid = 1e-2;
  double lr_mlp = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 7;

  void validate() const;
};

struct FitResult {
  TriplaneCubeField field;
  std::vector<LossReport> history;
};

// Adam on the TF regression loss; throws NumericalError on non-finite values.
FitResult fit(const TriplaneCubeField& init, const TfDataset& dataset, const FitConfig& config);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossReport>& history,
                    const FitConfig& config);

struct GradcheckReport {
  double max_rel_error = 0;
  size_t worst_index = 0;
  size_t parameters = 0;
};

// Central finite differences over every parameter.
GradcheckReport gradcheck(const FieldLayout& layout, std::span<const double> params, std::span<const TfSample> batch,
                          const LossOptions& opt, double h = 1e-4);

// The tiny-field check: planes 4x4x2, cube 2^3x2, hidden width 8, random
// batch. Used by the `gradcheck` command and the tests.
GradcheckReport tiny_gradcheck(std::uint64_t seed, double lambda = default_lambda, bool tv_include_cube = false);

FieldConfig tiny_field_config();

}  // namespace tfkit
