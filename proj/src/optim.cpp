#include "tfkit/optim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "field_eval.hpp"

namespace tfkit {

namespace {

using Matrix = Eigen::MatrixXd;
using RowMatrixMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMatrixMapMut = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr size_t chunk_size = 256;

// Sum of squared adjacent differences in a res x res x channels plane;
// accumulates scale * d(sum)/d(value) into grad when given.
double plane_tv_sum(const double* p, int res, int ch, double* grad, double scale) {
  double sum = 0;
  auto pair = [&](size_t a, size_t b) {
    for (int c = 0; c < ch; c++) {
      double d = p[b + c] - p[a + c];
      sum += d * d;
      if (grad) {
        grad[b + c] += 2 * scale * d;
        grad[a + c] -= 2 * scale * d;
      }
    }
  };
  for (int j = 0; j < res; j++)
    for (int i = 0; i + 1 < res; i++) pair((size_t(j) * res + i) * ch, (size_t(j) * res + i + 1) * ch);
  for (int j = 0; j + 1 < res; j++)
    for (int i = 0; i < res; i++) pair((size_t(j) * res + i) * ch, (size_t(j + 1) * res + i) * ch);
  return sum;
}

double cube_tv_sum(const double* p, int res, int ch, double* grad, double scale) {
  double sum = 0;
  auto at = [&](int x, int y, int z) { return ((size_t(z) * res + y) * res + x) * ch; };
  auto pair = [&](size_t a, size_t b) {
    for (int c = 0; c < ch; c++) {
      double d = p[b + c] - p[a + c];
      sum += d * d;
      if (grad) {
        grad[b + c] += 2 * scale * d;
        grad[a + c] -= 2 * scale * d;
      }
    }
  };
  for (int z = 0; z < res; z++)
    for (int y = 0; y < res; y++)
      for (int x = 0; x < res; x++) {
        if (x + 1 < res) pair(at(x, y, z), at(x + 1, y, z));
        if (y + 1 < res) pair(at(x, y, z), at(x, y + 1, z));
        if (z + 1 < res) pair(at(x, y, z), at(x, y, z + 1));
      }
  return sum;
}

double tv_term(const FieldLayout& L, const double* params, bool include_cube, double* grad, double lambda) {
  size_t plane_pairs = 2 * size_t(L.plane_res) * (L.plane_res - 1) * L.plane_channels;
  size_t count = 3 * plane_pairs;
  size_t cube_pairs = 3 * size_t(L.cube_res) * L.cube_res * (L.cube_res - 1) * L.cube_channels;
  if (include_cube) count += cube_pairs;
  double scale = lambda / double(count);
  double sum = 0;
  for (int p = 0; p < 3; p++)
    sum += plane_tv_sum(params + L.plane_offset(p), L.plane_res, L.plane_channels,
                        grad ? grad + L.plane_offset(p) : nullptr, scale);
  if (include_cube)
    sum += cube_tv_sum(params + L.cube_offset, L.cube_res, L.cube_channels, grad ? grad + L.cube_offset : nullptr,
                       scale);
  return sum / double(count);
}

// Forward and backward over one chunk of samples; returns the sum of squared
// color errors. Gradients of the mean loss over `n_total` samples are added
// to grad.
double chunk_pass(const FieldLayout& L, const double* params, std::span<const TfSample> samples, size_t n_total,
                  double* grad) {
  const int B = int(samples.size());
  const int layers = L.layers();
  std::vector<GridStencil> stencils(B);
  std::vector<Matrix> act(layers + 1);
  act[0].resize(L.widths[0], B);
  for (int s = 0; s < B; s++) {
    stencils[s] = grid_stencil(L, samples[s].query.cast<double>());
    detail::gather_features(L, params, stencils[s], act[0].col(s).data());
  }
  for (int l = 0; l < layers; l++) {
    RowMatrixMap W(params + L.weight_offset[l], L.widths[l + 1], L.widths[l]);
    Eigen::Map<const Eigen::VectorXd> b(params + L.bias_offset[l], L.widths[l + 1]);
    act[l + 1].noalias() = W * act[l];
    act[l + 1].colwise() += b;
    if (l + 1 < layers) act[l + 1] = act[l + 1].cwiseMax(0.0);
    else act[l + 1] = act[l + 1].unaryExpr([](double z) { return detail::sigmoid(z); });
  }
  Matrix target(3, B);
  for (int s = 0; s < B; s++) target.col(s) = samples[s].color.cast<double>();
  Matrix diff = act[layers] - target;
  double sq = diff.squaredNorm();
  if (!grad) return sq;

  const Matrix& out = act[layers];
  Matrix g = (2.0 / double(n_total)) * diff.cwiseProduct(out).cwiseProduct((1.0 - out.array()).matrix());
  for (int l = layers - 1; l >= 0; l--) {
    RowMatrixMapMut dW(grad + L.weight_offset[l], L.widths[l + 1], L.widths[l]);
    Eigen::Map<Eigen::VectorXd> db(grad + L.bias_offset[l], L.widths[l + 1]);
    dW.noalias() += g * act[l].transpose();
    db += g.rowwise().sum();
    RowMatrixMap W(params + L.weight_offset[l], L.widths[l + 1], L.widths[l]);
    Matrix prev = W.transpose() * g;
    if (l > 0) prev = prev.cwiseProduct((act[l].array() > 0.0).cast<double>().matrix());
    g = std::move(prev);
  }
  // g now holds d(loss)/d(features); scatter through the interpolation stencils
  const int cp = L.plane_channels, cc = L.cube_channels;
  for (int s = 0; s < B; s++) {
    const auto& st = stencils[s];
    const double* gf = g.col(s).data();
    for (int p = 0; p < 3; p++)
      for (int k = 0; k < 4; k++) {
        double w = st.plane_weight[p][k];
        if (w == 0) continue;
        double* dst = grad + st.plane_index[p][k];
        for (int c = 0; c < cp; c++) dst[c] += w * gf[p * cp + c];
      }
    for (int k = 0; k < 8; k++) {
      double w = st.cube_weight[k];
      if (w == 0) continue;
      double* dst = grad + st.cube_index[k];
      for (int c = 0; c < cc; c++) dst[c] += w * gf[3 * cp + c];
    }
  }
  return sq;
}

std::vector<double> to_double(std::span<const float> p) { return {p.begin(), p.end()}; }

}  // namespace

LossReport evaluate_loss(const FieldLayout& L, std::span<const double> params, std::span<const TfSample> batch,
                         const LossOptions& opt, std::span<double> gradient) {
  if (batch.empty()) throw InputError("loss needs a non-empty batch");
  if (params.size() != L.total) throw InputError("parameter vector does not match the field layout");
  bool want_grad = !gradient.empty();
  if (want_grad && gradient.size() != L.total) throw InputError("gradient buffer does not match the field layout");

  // Fixed chunking and in-order reduction keep results identical for any
  // thread count.
  const size_t n = batch.size();
  const long chunks = long((n + chunk_size - 1) / chunk_size);
  std::vector<double> chunk_sq(chunks, 0.0);
  std::vector<std::vector<double>> chunk_grad(want_grad ? chunks : 0);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads())
  for (long c = 0; c < chunks; c++) {
    size_t begin = size_t(c) * chunk_size, end = std::min(n, begin + chunk_size);
    double* g = nullptr;
    if (want_grad) {
      chunk_grad[c].assign(L.total, 0.0);
      g = chunk_grad[c].data();
    }
    chunk_sq[c] = chunk_pass(L, params.data(), batch.subspan(begin, end - begin), n, g);
  }

  LossReport r;
  r.lambda = opt.lambda;
  double sq = 0;
  for (double v : chunk_sq) sq += v;
  r.mse = sq / double(n);
  if (want_grad) {
    std::fill(gradient.begin(), gradient.end(), 0.0);
    for (const auto& cg : chunk_grad)
      for (size_t i = 0; i < L.total; i++) gradient[i] += cg[i];
  }
  r.tv = tv_term(L, params.data(), opt.tv_include_cube, want_grad ? gradient.data() : nullptr, opt.lambda);
  r.total = r.mse + opt.lambda * r.tv;
  return r;
}

double plane_tv(std::span<const double> plane, int res, int channels) {
  if (plane.size() != size_t(res) * res * channels) throw InputError("plane size does not match res x res x channels");
  double count = 2.0 * res * (res - 1) * channels;
  return plane_tv_sum(plane.data(), res, channels, nullptr, 0) / count;
}

LossReport loss(const TriplaneCubeField& field, std::span<const TfSample> batch, const LossOptions& opt) {
  auto p = to_double(field.params());
  return evaluate_loss(field.layout(), p, batch, opt);
}

std::vector<double> backward(const TriplaneCubeField& field, std::span<const TfSample> batch,
                             const LossOptions& opt) {
  auto p = to_double(field.params());
  std::vector<double> grad(p.size());
  evaluate_loss(field.layout(), p, batch, opt, grad);
  return grad;
}

void FitConfig::validate() const {
  if (!(lr_grid > 0 && lr_mlp > 0)) throw InputError("learning rates must be > 0");
  if (steps < 1 || batch < 1) throw InputError("steps and batch must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0)) throw InputError("invalid Adam constants");
  if (!(lambda >= 0)) throw InputError("lambda must be >= 0");
}

FitResult fit(const TriplaneCubeField& init, const TfDataset& dataset, const FitConfig& config) {
  config.validate();
  if (dataset.samples.empty()) throw InputError("cannot fit an empty dataset");
  const auto& L = init.layout();
  auto params = to_double(init.params());
  std::vector<double> grad(L.total), m(L.total, 0.0), v(L.total, 0.0);
  LossOptions opt{config.lambda, config.tv_include_cube};

  const size_t n = dataset.samples.size();
  const size_t b = std::min(n, size_t(config.batch));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  std::shuffle(order.begin(), order.end(), rng);
  size_t cursor = 0;
  std::vector<TfSample> batch(b);

  FitResult result{init, {}};
  result.history.reserve(config.steps);
  double b1t = 1, b2t = 1;
  for (int step = 0; step < config.steps; step++) {
    if (cursor + b > n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    for (size_t i = 0; i < b; i++) batch[i] = dataset.samples[order[cursor + i]];
    cursor += b;

    auto report = evaluate_loss(L, params, batch, opt, grad);
    if (!std::isfinite(report.mse))
      throw NumericalError("step " + std::to_string(step) + ": non-finite loss in component mse");
    if (!std::isfinite(report.tv))
      throw NumericalError("step " + std::to_string(step) + ": non-finite loss in component tv");
    for (size_t i = 0; i < L.total; i++)
      if (!std::isfinite(grad[i]))
        throw NumericalError("step " + std::to_string(step) + ": non-finite gradient at parameter " +
                             std::to_string(i) + (i < L.grid_count ? " (grid)" : " (mlp)"));
    result.history.push_back(report);

    b1t *= config.beta1;
    b2t *= config.beta2;
    for (size_t i = 0; i < L.total; i++) {
      double g = grad[i];
      m[i] = config.beta1 * m[i] + (1 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1 - config.beta2) * g * g;
      double mh = m[i] / (1 - b1t), vh = v[i] / (1 - b2t);
      double lr = i < L.grid_count ? config.lr_grid : config.lr_mlp;
      params[i] -= lr * mh / (std::sqrt(vh) + config.eps);
    }
  }
  auto out = result.field.params();
  for (size_t i = 0; i < L.total; i++) out[i] = float(params[i]);
  if (!result.field.all_finite()) throw NumericalError("fit produced non-finite parameters");
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossReport>& history,
                    const FitConfig& c) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write loss csv " + path.string());
  out.precision(17);
  out << "# lambda=" << c.lambda << " steps=" << c.steps << " batch=" << c.batch << " lr_grid=" << c.lr_grid
      << " lr_mlp=" << c.lr_mlp << " beta1=" << c.beta1 << " beta2=" << c.beta2 << " eps=" << c.eps
      << " seed=" << c.seed << " tv_include_cube=" << (c.tv_include_cube ? 1 : 0) << "\n";
  out << "step,mse,tv,total\n";
  for (size_t i = 0; i < history.size(); i++)
    out << i << "," << history[i].mse << "," << history[i].tv << "," << history[i].total << "\n";
}

GradcheckReport gradcheck(const FieldLayout& L, std::span<const double> params, std::span<const TfSample> batch,
                          const LossOptions& opt, double h) {
  std::vector<double> analytic(L.total);
  evaluate_loss(L, params, batch, opt, analytic);
  std::vector<double> p(params.begin(), params.end());
  GradcheckReport rep;
  rep.parameters = L.total;
  for (size_t i = 0; i < L.total; i++) {
    double orig = p[i];
    p[i] = orig + h;
    double plus = evaluate_loss(L, p, batch, opt).total;
    p[i] = orig - h;
    double minus = evaluate_loss(L, p, batch, opt).total;
    p[i] = orig;
    double fd = (plus - minus) / (2 * h);
    // components below 1e-6 in both routes are compared absolutely
    double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
    double rel = std::abs(analytic[i] - fd) / denom;
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = i;
    }
  }
  return rep;
}

FieldConfig tiny_field_config() {
  FieldConfig c;
  c.plane_res = 4;
  c.plane_channels = 2;
  c.cube_res = 2;
  c.cube_channels = 2;
  c.hidden = 8;
  c.hidden_layers = 2;
  c.init_std = 0.5;
  return c;
}

GradcheckReport tiny_gradcheck(std::uint64_t seed, double lambda, bool tv_include_cube) {
  auto field = init_field(tiny_field_config(), seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> cube(-1.0, 1.0), unit(0.0, 1.0);
  std::vector<TfSample> batch(24);
  for (auto& s : batch) {
    s.query = vec3(cube(rng), cube(rng), cube(rng)).cast<float>();
    s.color = vec3(unit(rng), unit(rng), unit(rng)).cast<float>();
    s.in_shell = true;
  }
  auto params = to_double(field.params());
  return gradcheck(field.layout(), params, batch, {lambda, tv_include_cube});
}

}  // namespace tfkit
