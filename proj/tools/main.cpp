#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "CLI11.hpp"
#include "runconfig.hpp"
#include "tfkit/ablation.hpp"
#include "tfkit/bake.hpp"
#include "tfkit/optim.hpp"
#include "tfkit/raster.hpp"
#include "tfkit/reproject.hpp"
#include "tfkit/shapes.hpp"

namespace fs = std::filesystem;
using namespace tfkit;
using tfkit::cli::Command;

namespace {

vec3f to_vec3f(const std::vector<double>& v) { return vec3f(float(v[0]), float(v[1]), float(v[2])); }

fs::path parent_dir(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

// Creates the parent directory of an output file.
const fs::path& output_file(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

bool has_extension(const fs::path& p, const std::string& ext) { return p.extension() == ext; }

fs::path transform_path(const fs::path& mesh_path) {
  auto p = mesh_path;
  return p.replace_extension(".transform");
}

void write_transform(const fs::path& path, const Similarity& s) {
  std::ofstream out(path);
  out << "scale " << cli::format_value(s.scale) << "\n";
  out << "translation " << cli::format_value(s.translation.x()) << " " << cli::format_value(s.translation.y()) << " "
      << cli::format_value(s.translation.z()) << "\n";
  if (!out) throw InputError("cannot write " + path.string());
}

Similarity read_transform(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open transform " + path.string());
  Similarity s;
  std::string key;
  while (in >> key) {
    if (key == "scale") in >> s.scale;
    else if (key == "translation") in >> s.translation.x() >> s.translation.y() >> s.translation.z();
    else throw InputError("unknown key '" + key + "' in " + path.string());
  }
  if (!in.eof() || !(s.scale > 0)) throw InputError("malformed transform " + path.string());
  return s;
}

// Predictors for `bake` and `eval`: a .tcf field, or the untruncated color
// of the closest point on another mesh.
struct PredictorSource {
  std::optional<TriplaneCubeField> field;
  std::optional<TriMesh> mesh;
  std::optional<Bvh> bvh;
  Predictor predictor;

  explicit PredictorSource(const fs::path& path) {
    if (has_extension(path, ".tcf")) {
      field = load_field(path);
      predictor = field_predictor(*field);
    } else {
      mesh = load_mesh(path);
      bvh = build_bvh(*mesh);
      predictor = tf_predictor(*bvh, *mesh, std::numeric_limits<float>::infinity());
    }
  }
};

struct NormalizeArgs {
  fs::path in, out, invert;
  double margin = default_margin;
};

void add_normalize(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "normalize", "scale and center a mesh into [-1, 1]^3");
  auto args = std::make_shared<NormalizeArgs>();
  cmd->positional("in", args->in, "input OBJ");
  cmd->positional("out", args->out, "output OBJ; the transform is written next to it as <out>.transform");
  cmd->option("margin", args->margin, "relative margin inside the unit cube");
  cmd->option("invert", args->invert, "apply the inverse of this transform file instead");
  cmd->app()->callback([cmd, args] {
    cmd->finalize();
    set_threads(cmd->threads);
    auto mesh = load_mesh(args->in);
    if (!args->invert.empty()) {
      auto s = read_transform(args->invert);
      for (auto& p : mesh.positions) p = s.invert(p);
      save_mesh(output_file(args->out), mesh);
    } else {
      auto [normalized, s] = normalize_unit(mesh, args->margin);
      save_mesh(output_file(args->out), normalized);
      write_transform(transform_path(args->out), s);
    }
    cmd->write_run_cfg(parent_dir(args->out));
  });
}

struct SampleArgs {
  fs::path mesh, out;
  size_t n = 200000;
  double tau = default_tau;
  std::vector<double> bg{0.5, 0.5, 0.5};
  std::vector<double> mix{0.5, 0.25, 0.25};
  std::vector<double> sigma{0.01, 0.05};
  std::uint64_t seed = 7;
};

void add_sample_tf(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "sample-tf", "label points with the truncated texture function");
  auto a = std::make_shared<SampleArgs>();
  cmd->positional("mesh", a->mesh, "input OBJ in [-1, 1]^3");
  cmd->positional("out", a->out, "output TFDS dataset");
  cmd->option("n", a->n, "number of samples");
  cmd->option("tau", a->tau, "truncation distance");
  cmd->list("bg", a->bg, 3, "background color r,g,b");
  cmd->list("mix", a->mix, 3, "fractions near_narrow,near_wide,uniform");
  cmd->list("sigma", a->sigma, 2, "Gaussian offsets narrow,wide");
  cmd->option("seed", a->seed, "random seed");
  cmd->app()->callback([cmd, a] {
    cmd->finalize();
    set_threads(cmd->threads);
    SamplingMix mix{a->mix[0], a->mix[1], a->mix[2], a->sigma[0], a->sigma[1]};
    mix.validate();
    if (!(a->tau > 0)) throw InputError("tau must be > 0");
    auto mesh = load_mesh(a->mesh);
    auto bvh = build_bvh(mesh);
    auto ds = sample_tf_dataset(bvh, mesh, a->n, mix, float(a->tau), to_vec3f(a->bg), a->seed,
                                a->mesh.filename().string());
    write_dataset(ds, output_file(a->out));
    size_t shell = 0;
    for (const auto& s : ds.samples) shell += s.in_shell;
    std::printf("%zu samples, %zu in shell\n", ds.samples.size(), shell);
    cmd->write_run_cfg(parent_dir(a->out));
  });
}

struct RenderArgs {
  fs::path mesh, outdir;
  std::string views = "six";
  int res = 512;
  double half_extent = 1.0;
  std::string modes = "color,normal,ccm,depth,mask";
};

void add_render(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "render", "render orthographic views");
  auto a = std::make_shared<RenderArgs>();
  cmd->positional("mesh", a->mesh, "input OBJ");
  cmd->positional("outdir", a->outdir, "output directory");
  cmd->option("views", a->views, "camera rig (six)");
  cmd->option("res", a->res, "image resolution");
  cmd->option("half-extent", a->half_extent, "half width of the view volume");
  cmd->option("modes", a->modes, "comma-separated subset of color,normal,ccm,depth,mask");
  cmd->app()->callback([cmd, a] {
    cmd->finalize();
    set_threads(cmd->threads);
    if (a->views != "six") throw InputError("unknown view rig '" + a->views + "'");
    unsigned modes = parse_render_modes(a->modes);
    auto mesh = load_mesh(a->mesh);
    auto cameras = six_views(a->res, a->half_extent);
    fs::create_directories(a->outdir);
    size_t covered = 0;
    for (size_t i = 0; i < cameras.size(); i++) {
      auto out = render(mesh, cameras[i], modes | render_mask);
      for (auto m : out.mask.pixels) covered += m != 0;
      write_render(a->outdir, i, out, modes);
    }
    write_rig(a->outdir / "rig.txt", cameras);
    std::printf("%zu views, %zu covered pixels\n", cameras.size(), covered);
    cmd->write_run_cfg(a->outdir);
  });
}

struct ReprojectArgs {
  fs::path mesh, viewdir, out;
  double p = 4, eps_z = 1e-3, wmin = 0.05;
  size_t targets = 200000;
  int uv_res = 1024;
  std::uint64_t seed = 7;
};

void add_reproject(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "reproject", "project rendered views back onto the surface");
  auto a = std::make_shared<ReprojectArgs>();
  cmd->positional("mesh", a->mesh, "input OBJ");
  cmd->positional("viewdir", a->viewdir, "directory written by render");
  cmd->positional("out", a->out, ".ply point cloud, or .png texture (plus <stem>_weight.pfm)");
  cmd->option("p", a->p, "view weight exponent");
  cmd->option("eps-z", a->eps_z, "depth test tolerance");
  cmd->option("wmin", a->wmin, "minimum accumulated weight for a valid element");
  cmd->option("targets", a->targets, "surface samples for .ply output");
  cmd->option("uv-res", a->uv_res, "texture resolution for .png output");
  cmd->option("seed", a->seed, "random seed for surface targets");
  cmd->app()->callback([cmd, a] {
    cmd->finalize();
    set_threads(cmd->threads);
    auto mesh = load_mesh(a->mesh);
    auto views = read_views(a->viewdir);
    ReprojectOptions opt{a->eps_z, a->p, a->wmin};
    PartialTexture partial;
    if (has_extension(a->out, ".png")) {
      partial = reproject_uv(mesh, views, a->uv_res, a->uv_res, opt);
      auto weight = a->out;
      weight.replace_filename(a->out.stem().string() + "_weight.pfm");
      write_partial_texture(output_file(a->out), weight, partial);
    } else {
      partial = reproject(views, sample_targets(sample_surface(mesh, a->targets, a->seed)), opt);
      write_partial_ply(output_file(a->out), partial);
    }
    std::printf("valid fraction %.6f of %zu elements\n", partial.valid_fraction(), partial.size());
    cmd->write_run_cfg(parent_dir(a->out));
  });
}

struct FitArgs {
  fs::path dataset, out, eval_mesh;
  FitConfig fit;
  FieldConfig field;
  std::uint64_t init_seed = 7;
};

void add_fit(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "fit", "fit a triplane-cube field to a TF dataset");
  auto a = std::make_shared<FitArgs>();
  cmd->positional("dataset", a->dataset, "TFDS dataset");
  cmd->positional("out", a->out, "output checkpoint (.tcf); loss log goes to <stem>_loss.csv");
  cmd->option("steps", a->fit.steps, "Adam steps");
  cmd->option("batch", a->fit.batch, "batch size");
  cmd->option("lambda", a->fit.lambda, "TV weight");
  cmd->flag("tv-cube", a->fit.tv_include_cube, "include the cube in the TV term");
  cmd->option("lr-grid", a->fit.lr_grid, "learning rate of planes and cube");
  cmd->option("lr-mlp", a->fit.lr_mlp, "learning rate of the decoder");
  cmd->option("beta1", a->fit.beta1, "Adam beta1");
  cmd->option("beta2", a->fit.beta2, "Adam beta2");
  cmd->option("eps", a->fit.eps, "Adam epsilon");
  cmd->option("seed", a->fit.seed, "batch shuffling seed");
  cmd->option("init-seed", a->init_seed, "parameter initialization seed");
  cmd->option("plane-res", a->field.plane_res, "plane resolution");
  cmd->option("plane-channels", a->field.plane_channels, "plane channels");
  cmd->option("cube-res", a->field.cube_res, "cube resolution");
  cmd->option("cube-channels", a->field.cube_channels, "cube channels");
  cmd->option("hidden", a->field.hidden, "decoder hidden width");
  cmd->option("layers", a->field.hidden_layers, "decoder hidden layers");
  cmd->option("init-std", a->field.init_std, "std of initial grid features");
  cmd->option("eval-mesh", a->eval_mesh, "report psnr_uv against this mesh after fitting");
  cmd->app()->callback([cmd, a] {
    cmd->finalize();
    set_threads(cmd->threads);
    a->fit.validate();
    auto ds = read_dataset(a->dataset);
    auto result = fit(init_field(a->field, a->init_seed), ds, a->fit);
    save_field(output_file(a->out), result.field);
    auto csv = a->out;
    csv.replace_filename(a->out.stem().string() + "_loss.csv");
    write_loss_csv(csv, result.history, a->fit);
    const auto& last = result.history.back();
    std::printf("final batch loss mse=%.6g tv=%.6g total=%.6g\n", last.mse, last.tv, last.total);
    if (!a->eval_mesh.empty()) {
      auto mesh = load_mesh(a->eval_mesh);
      std::printf("psnr_uv %.3f dB\n", psnr_uv(mesh, field_predictor(result.field), 100000, 11));
    }
    cmd->write_run_cfg(parent_dir(a->out));
  });
}

struct GradcheckArgs {
  std::uint64_t seed = 1;
  double lambda = default_lambda;
  bool tv_cube = false;
  double tolerance = 1e-3;
};

void add_gradcheck(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "gradcheck", "finite-difference check of the loss gradient");
  auto a = std::make_shared<GradcheckArgs>();
  cmd->option("seed", a->seed, "seed of the tiny field and batch");
  cmd->option("lambda", a->lambda, "TV weight");
  cmd->flag("tv-cube", a->tv_cube, "include the cube in the TV term");
  cmd->option("tolerance", a->tolerance, "maximum relative error");
  cmd->app()->callback([cmd, a] {
    cmd->finalize();
    set_threads(cmd->threads);
    auto report = tiny_gradcheck(a->seed, a->lambda, a->tv_cube);
    bool ok = report.max_rel_error < a->tolerance;
    std::printf("%zu parameters, max relative error %.3e at %zu: %s\n", report.parameters, report.max_rel_error,
                report.worst_index, ok ? "ok" : "FAILED");
    if (!ok) throw NumericalError("gradient check failed");
  });
}

struct BakeArgs {
  fs::path mesh, source, out, blend;
  std::string mode = "uv:1024";
  int dilate = 2;
  double wsat = 1.0, k = 1.0, wmin = 0.05, blend_radius = 0.02;
};

void add_bake(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "bake", "bake a predictor into a texture or vertex colors");
  auto a = std::make_shared<BakeArgs>();
  cmd->positional("mesh", a->mesh, "target OBJ");
  cmd->positional("field", a->source, "field checkpoint (.tcf) or a colored mesh to transfer from");
  cmd->positional("out", a->out, "output OBJ (uv mode) or OBJ/PLY (vertex mode)");
  cmd->option("mode", a->mode, "uv:<resolution> or vertex");
  cmd->option("dilate", a->dilate, "gutter dilation iterations");
  cmd->option("blend", a->blend, "partial texture to blend in (.ply points or .png texture)");
  cmd->option("wsat", a->wsat, "weight at which the partial fully replaces the prediction");
  cmd->option("k", a->k, "blend exponent");
  cmd->option("wmin", a->wmin, "minimum weight of a valid partial element");
  cmd->option("blend-radius", a->blend_radius, "nearest-element search radius for .ply partials");
  cmd->app()->callback([cmd, a] {
    cmd->finalize();
    set_threads(cmd->threads);
    BakeTarget target;
    if (a->mode == "vertex") {
      target.mode = BakeMode::vertex_colors;
    } else if (a->mode.rfind("uv:", 0) == 0) {
      try {
        target.resolution = std::stoi(a->mode.substr(3));
      } catch (const std::exception&) {
        throw InputError("bad bake mode '" + a->mode + "'");
      }
    } else {
      throw InputError("bad bake mode '" + a->mode + "', expected uv:<res> or vertex");
    }
    target.dilation = a->dilate;
    auto mesh = load_mesh(a->mesh);
    if (target.mode == BakeMode::uv_texture && !mesh.has_uvs())
      throw InputError("uv bake requires texture coordinates: " + a->mesh.string());
    PredictorSource source(a->source);
    BlendOptions blend_opt{a->wsat, a->k};
    Predictor predictor = source.predictor;
    PartialTexture partial;
    std::optional<PartialLookup> lookup;
    bool texel_blend = false;
    if (!a->blend.empty()) {
      if (has_extension(a->blend, ".png")) {
        if (target.mode != BakeMode::uv_texture) throw InputError("a .png partial needs uv mode");
        texel_blend = true;
      } else {
        partial = read_partial_ply(a->blend, a->wmin);
        lookup.emplace(partial, a->blend_radius);
        predictor = blended_predictor(partial, *lookup, predictor, blend_opt);
      }
    }
    auto result = bake(mesh, predictor, target);
    if (texel_blend) {
      auto weight = a->blend;
      weight.replace_filename(a->blend.stem().string() + "_weight.pfm");
      blend_texture(result.texture, read_png(a->blend), read_pfm(weight), a->wmin, blend_opt);
    }
    for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    auto baked = apply_bake(mesh, result);
    if (target.mode == BakeMode::vertex_colors && has_extension(a->out, ".ply"))
      write_ply(output_file(a->out), baked, baked.vertex_colors);
    else
      save_mesh(output_file(a->out), baked);
    cmd->write_run_cfg(parent_dir(a->out));
  });
}

struct EvalArgs {
  fs::path mesh, pred, out;
  size_t n = 100000;
  std::uint64_t seed = 11;
  int view_res = 256;
};

MetricReport evaluate(const TriMesh& mesh, const PredictorSource& pred, const EvalArgs& a) {
  MetricReport report;
  report.sample_count = a.n;
  report.psnr_uv = psnr_uv(mesh, pred.predictor, a.n, a.seed);
  if (a.view_res > 0) {
    double sum = 0;
    for (const auto& cam : six_views(a.view_res)) {
      auto gt = render(mesh, cam, render_color | render_ccm | render_mask);
      ImageF image(cam.width, cam.height, 3);
      ImageU8 mask = gt.mask;
      if (pred.mesh) {
        auto other = render(*pred.mesh, cam, render_color | render_mask);
        image = other.color;
        for (size_t i = 0; i < mask.pixels.size(); i++) mask.pixels[i] = mask.pixels[i] && other.mask.pixels[i] ? 255 : 0;
      } else {
        for (int y = 0; y < cam.height; y++)
          for (int x = 0; x < cam.width; x++)
            if (mask.at(x, y)) set_pixel_rgb(image, x, y, pred.predictor(decode_unit(pixel_rgb(gt.ccm, x, y))));
      }
      double p = psnr_image(image, gt.color, mask);
      report.psnr_image.push_back(p);
      sum += p;
    }
    report.psnr_image_mean = sum / double(report.psnr_image.size());
  }
  return report;
}

void add_eval(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "eval", "compare a prediction with a ground-truth mesh");
  auto a = std::make_shared<EvalArgs>();
  cmd->positional("mesh", a->mesh, "ground-truth OBJ");
  cmd->positional("pred", a->pred, "field checkpoint (.tcf) or colored OBJ");
  cmd->option("n", a->n, "surface samples for psnr_uv");
  cmd->option("seed", a->seed, "surface sampling seed");
  cmd->option("view-res", a->view_res, "resolution of the six comparison views (0 disables)");
  cmd->option("out", a->out, "also write the CSV and a text summary here");
  cmd->app()->callback([cmd, a] {
    cmd->finalize();
    set_threads(cmd->threads);
    auto mesh = load_mesh(a->mesh);
    PredictorSource pred(a->pred);
    auto report = evaluate(mesh, pred, *a);
    auto csv = metrics_csv(report);
    std::fputs(csv.c_str(), stdout);
    if (!a->out.empty()) {
      std::ofstream(output_file(a->out)) << csv;
      auto txt = a->out;
      std::ofstream(txt.replace_extension(".txt")) << metrics_text(report);
      cmd->write_run_cfg(parent_dir(a->out));
    }
  });
}

struct AblateArgs {
  fs::path mesh, outdir;
  AblationConfig config;
  std::vector<double> mix{0.5, 0.25, 0.25};
  std::vector<double> sigma{0.01, 0.05};
  double tau = default_tau;
};

void add_ablate(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "ablate", "volumetric TF supervision against surface-only supervision");
  auto a = std::make_shared<AblateArgs>();
  auto& c = a->config;
  cmd->positional("mesh", a->mesh, "input OBJ in [-1, 1]^3");
  cmd->positional("outdir", a->outdir, "output directory");
  cmd->option("n", c.samples, "dataset size of each run");
  cmd->option("probes", c.probes, "held-out probes");
  cmd->option("psnr-samples", c.psnr_samples, "surface samples for psnr_uv");
  cmd->option("tau", a->tau, "truncation distance");
  cmd->list("mix", a->mix, 3, "volumetric run fractions near_narrow,near_wide,uniform");
  cmd->list("sigma", a->sigma, 2, "Gaussian offsets narrow,wide");
  cmd->option("steps", c.fit.steps, "Adam steps of each run");
  cmd->option("batch", c.fit.batch, "batch size");
  cmd->option("lambda", c.fit.lambda, "TV weight");
  cmd->option("lr-grid", c.fit.lr_grid, "learning rate of planes and cube");
  cmd->option("lr-mlp", c.fit.lr_mlp, "learning rate of the decoder");
  cmd->option("seed", c.fit.seed, "seed shared by both runs");
  cmd->app()->callback([cmd, a] {
    cmd->finalize();
    set_threads(cmd->threads);
    auto& c = a->config;
    c.mix = {a->mix[0], a->mix[1], a->mix[2], a->sigma[0], a->sigma[1]};
    c.mix.validate();
    if (!(a->tau > 0)) throw InputError("tau must be > 0");
    c.tau = float(a->tau);
    c.fit.validate();
    auto mesh = load_mesh(a->mesh);
    auto report = run_ablation(mesh, c);
    fs::create_directories(a->outdir);
    auto csv = ablation_csv(report);
    std::ofstream(a->outdir / "ablation.csv") << csv;
    save_field(a->outdir / "volumetric.tcf", report.volumetric.field);
    save_field(a->outdir / "surface.tcf", report.surface.field);
    write_loss_csv(a->outdir / "volumetric_loss.csv", report.volumetric.history, c.fit);
    write_loss_csv(a->outdir / "surface_loss.csv", report.surface.history, c.fit);
    std::fputs(csv.c_str(), stdout);
    cmd->write_run_cfg(a->outdir);
  });
}

void add_fixture(CLI::App& app) {
  auto cmd = std::make_shared<Command>(app, "fixture", "write a procedural test mesh");
  auto name = std::make_shared<std::string>();
  auto out = std::make_shared<fs::path>();
  auto res = std::make_shared<int>(512);
  cmd->positional("name", *name, "sphere, box or cup");
  cmd->positional("out", *out, "output OBJ");
  cmd->option("tex-res", *res, "texture resolution of textured fixtures");
  cmd->app()->callback([cmd, name, out, res] {
    cmd->finalize();
    TriMesh mesh;
    if (*name == "sphere") mesh = shapes::uv_sphere(0.8, 64, 32, 2 * *res, *res);
    else if (*name == "box") mesh = shapes::textured_box({0.7, 0.5, 0.6}, *res);
    else if (*name == "cup") mesh = shapes::cup(0.6, 0.45, 0.15, {0.8, 0.3, 0.2});
    else throw InputError("unknown fixture '" + *name + "'");
    save_mesh(output_file(*out), mesh);
    cmd->write_run_cfg(parent_dir(*out));
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Texture-function toolkit: sampling, fitting, rendering, reprojection and baking"};
  app.require_subcommand(1);
  add_normalize(app);
  add_sample_tf(app);
  add_render(app);
  add_reproject(app);
  add_fit(app);
  add_gradcheck(app);
  add_bake(app);
  add_eval(app);
  add_ablate(app);
  add_fixture(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
