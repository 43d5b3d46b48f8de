#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "imdn/complexity.hpp"
#include "imdn/dataset.hpp"
#include "imdn/gradcheck.hpp"
#include "imdn/metrics.hpp"
#include "imdn/tiler.hpp"
#include "imdn/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace imdn;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitError = 3;
constexpr double kGradTolerance = 1e-4;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json to_json(const ImdnConfig& c) {
  return {{"num_blocks", c.num_blocks},   {"channels", c.channels},
          {"distilled", c.distilled},     {"coarse", c.coarse},
          {"cca_squeeze", c.cca_squeeze}, {"leaky_slope", c.leaky_slope},
          {"scale", c.scale},             {"use_cca", c.use_cca},
          {"use_iic", c.use_iic},
          {"block", c.block == BlockKind::prm ? "prm" : "plain-3conv"},
          {"topology", c.topology == Topology::standard ? "standard" : "any-scale"}};
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"epsilon", c.epsilon},
          {"halve_every", c.halve_every},     {"batch_size", c.batch_size},
          {"hr_patch", c.hr_patch},           {"horizontal_flip", c.augment.horizontal_flip},
          {"rotate90", c.augment.rotate90}};
}

void write_manifest(const fs::path& path, json manifest) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::io_failure, "cannot write '" + path.string() + "'");
  os << manifest.dump(2) << '\n';
}

fs::path manifest_for(const fs::path& output) {
  fs::path p = output;
  p += ".manifest.json";
  return p;
}

Variant variant_or_throw(const std::string& name) {
  if (auto v = parse_variant(name)) return *v;
  std::string known;
  for (Variant v : all_variants()) known += (known.empty() ? "" : ", ") + std::string(to_string(v));
  throw CLI::ValidationError("--variant", "unknown variant '" + name + "' (known: " + known + ")");
}

// Runs a standard network on an LR image, or an any-scale one on the
// bicubic-upscaled image (tiled when the size is not a multiple of 4).
ImageBuffer super_resolve(const Model& model, const ImageBuffer& lr, int scale) {
  if (model.config().topology == Topology::standard)
    return tensor_to_image(model.forward(image_to_tensor(lr)));
  const ImageBuffer up = bicubic_resize(lr, lr.height * scale, lr.width * scale);
  if (up.height % 4 == 0 && up.width % 4 == 0)
    return tensor_to_image(model.forward(image_to_tensor(up)));
  return super_resolve_tiled(up, model);
}

// ---- train -------------------------------------------------------------

struct TrainArgs {
  fs::path data;
  fs::path out;
  int scale = 2;
  std::int64_t steps = 1000;
  int blocks = 0;
  int channels = 0;
  std::string variant = "imdn";
  std::uint64_t seed = 0;
  TrainConfig config;
  bool no_augment = false;
  int log_every = 0;
};

int run_train(const TrainArgs& a) {
  const std::string started = utc_now();
  const Variant variant = variant_or_throw(a.variant);
  if (a.scale < 1) fail(ErrorCode::invalid_argument, "--scale must be positive");
  TrainConfig tc = a.config;
  tc.augment = {!a.no_augment, !a.no_augment};
  tc.validate(a.scale);

  ImdnConfig mc = config_for(variant, a.scale);
  if (a.blocks > 0) mc.num_blocks = a.blocks;
  if (a.channels > 0) {
    const ImdnConfig n = ImdnConfig::narrow(a.channels, mc.num_blocks, mc.scale);
    mc.channels = n.channels;
    mc.distilled = n.distilled;
    mc.coarse = n.coarse;
    mc.cca_squeeze = n.cca_squeeze;
  }
  Model model(mc);
  init_weights(model, a.seed);

  const bool same_size = mc.topology == Topology::any_scale;
  std::vector<TrainingImage> dataset;
  for (const fs::path& p : list_png_files(a.data))
    dataset.push_back(make_training_image(load_png(p), a.scale, same_size, p.filename().string()));
  if (dataset.empty())
    fail(ErrorCode::invalid_argument, "no PNG images in '" + a.data.string() + "'");

  const std::int64_t log_every = a.log_every > 0 ? a.log_every : std::max<std::int64_t>(1, a.steps / 10);
  TrainOptions opts;
  opts.steps = a.steps;
  opts.seed = a.seed;
  opts.on_step = [log_every](const LossRecord& r) {
    if (r.step % log_every == 0) std::cout << "step " << r.step << "  loss " << r.loss << '\n';
    return true;
  };
  const std::vector<LossRecord> history = train_loop(model, dataset, tc, opts);

  fs::create_directories(a.out);
  const fs::path weights = a.out / "weights.imdnw";
  const fs::path loss_csv = a.out / "loss.csv";
  save_weights(model, weights);
  {
    std::ofstream os(loss_csv);
    if (!os) fail(ErrorCode::io_failure, "cannot write '" + loss_csv.string() + "'");
    write_loss_csv(os, history);
  }
  json images = json::array();
  for (const TrainingImage& img : dataset) images.push_back(img.name);
  write_manifest(a.out / "manifest.json",
                 {{"command", "train"},
                  {"variant", a.variant},
                  {"scale", a.scale},
                  {"steps", a.steps},
                  {"seed", a.seed},
                  {"data", a.data.string()},
                  {"images", images},
                  {"model", to_json(mc)},
                  {"train", to_json(tc)},
                  {"started_at", started},
                  {"finished_at", utc_now()},
                  {"outputs", {{"weights", weights.string()}, {"loss_csv", loss_csv.string()}}}});
  std::cout << "wrote " << weights.string() << '\n';
  return 0;
}

// ---- sr / sr-any -------------------------------------------------------

struct SrArgs {
  fs::path weights;
  fs::path input;
  fs::path output;
  int scale = 0;
  int padding = kDefaultTilePadding;
  double resize = 1.0;
};

int run_sr(const SrArgs& a) {
  const std::string started = utc_now();
  const Model model = load_weights(a.weights);
  const ImdnConfig& mc = model.config();
  if (mc.topology != Topology::standard)
    fail(ErrorCode::invalid_argument, "weights are for an any-scale network; use sr-any");
  if (a.scale != 0 && a.scale != mc.scale)
    fail(ErrorCode::invalid_argument, "weights were trained for x" + std::to_string(mc.scale) +
                                          " but --scale is " + std::to_string(a.scale));
  const ImageBuffer lr = load_png(a.input);
  const ImageBuffer sr = tensor_to_image(model.forward(image_to_tensor(lr)));
  save_png(sr, a.output);
  write_manifest(manifest_for(a.output), {{"command", "sr"},
                                          {"weights", a.weights.string()},
                                          {"input", a.input.string()},
                                          {"scale", mc.scale},
                                          {"started_at", started},
                                          {"finished_at", utc_now()},
                                          {"outputs", {{"image", a.output.string()}}}});
  std::cout << lr.width << "x" << lr.height << " -> " << sr.width << "x" << sr.height << '\n';
  return 0;
}

int run_sr_any(const SrArgs& a) {
  const std::string started = utc_now();
  if (a.padding < 4 || a.padding % 4 != 0)
    fail(ErrorCode::invalid_argument,
         "--padding must be a positive multiple of 4, got " + std::to_string(a.padding));
  if (!(a.resize > 0.0)) fail(ErrorCode::invalid_argument, "--resize must be positive");
  const Model model = load_weights(a.weights);
  if (model.config().topology != Topology::any_scale)
    fail(ErrorCode::invalid_argument, "sr-any needs any-scale (imdn-as) weights");
  ImageBuffer in = load_png(a.input);
  if (a.resize != 1.0) {
    const int h = static_cast<int>(std::lround(in.height * a.resize));
    const int w = static_cast<int>(std::lround(in.width * a.resize));
    in = bicubic_resize(in, h, w);
  }
  const Tensor whole = image_to_tensor(in);
  const Tensor out = tiled_forward(model, whole, a.padding);
  const double seam = seam_discontinuity(out, in.height, in.width);
  save_png(tensor_to_image(out), a.output);
  write_manifest(manifest_for(a.output), {{"command", "sr-any"},
                                          {"weights", a.weights.string()},
                                          {"input", a.input.string()},
                                          {"padding", a.padding},
                                          {"resize", a.resize},
                                          {"tiles", 4},
                                          {"seam_discontinuity", seam},
                                          {"started_at", started},
                                          {"finished_at", utc_now()},
                                          {"outputs", {{"image", a.output.string()}}}});
  std::cout << "tiles 4  padding " << a.padding << "  size " << in.width << "x" << in.height
            << "  seam_discontinuity " << seam << '\n';
  return 0;
}

// ---- eval --------------------------------------------------------------

struct EvalArgs {
  fs::path data;
  fs::path weights;
  bool identity = false;
  int scale = 0;
  int shave = -1;
  fs::path csv;
};

int run_eval(const EvalArgs& a) {
  const std::string started = utc_now();
  std::optional<Model> model;
  int scale = a.scale;
  if (!a.identity) {
    if (a.weights.empty()) throw CLI::ValidationError("--weights", "required unless --identity");
    model.emplace(load_weights(a.weights));
    if (model->config().topology == Topology::standard) {
      if (scale != 0 && scale != model->config().scale)
        fail(ErrorCode::invalid_argument, "--scale does not match the weights");
      scale = model->config().scale;
    }
  }
  if (scale < 1) throw CLI::ValidationError("--scale", "required for identity or any-scale runs");
  const int shave = a.shave >= 0 ? a.shave : scale;

  const std::vector<fs::path> files = list_png_files(a.data);
  if (files.empty()) fail(ErrorCode::invalid_argument, "no PNG images in '" + a.data.string() + "'");
  std::vector<ImageScore> scores;
  for (const fs::path& p : files) {
    const ImageBuffer hr = mod_crop(load_png(p), scale);
    ImageBuffer sr;
    if (model) {
      const ImageBuffer lr = bicubic_resize(hr, hr.height / scale, hr.width / scale);
      sr = super_resolve(*model, lr, scale);
    } else {
      sr = hr;
    }
    scores.push_back({p.filename().string(), psnr_y(sr, hr, shave), ssim_y(sr, hr, shave)});
  }
  const EvalReport report = summarize(std::move(scores), shave);

  std::ofstream file;
  if (!a.csv.empty()) {
    file.open(a.csv);
    if (!file) fail(ErrorCode::io_failure, "cannot write '" + a.csv.string() + "'");
  }
  std::ostream& os = a.csv.empty() ? std::cout : file;
  os << std::setprecision(17) << "image,psnr_db,ssim\n";
  for (const ImageScore& s : report.images) os << s.name << ',' << s.psnr_db << ',' << s.ssim << '\n';
  os << "mean," << report.mean_psnr_db << ',' << report.mean_ssim << '\n';
  if (!a.csv.empty())
    write_manifest(manifest_for(a.csv), {{"command", "eval"},
                                         {"data", a.data.string()},
                                         {"weights", a.identity ? "" : a.weights.string()},
                                         {"identity", a.identity},
                                         {"scale", scale},
                                         {"shave", shave},
                                         {"started_at", started},
                                         {"finished_at", utc_now()},
                                         {"outputs", {{"csv", a.csv.string()}}}});
  return 0;
}

// ---- analyze -----------------------------------------------------------

struct Golden {
  std::int64_t params_k;
  std::optional<std::int64_t> macs_k;
  std::optional<int> depth;
};

std::optional<Golden> reference_values(Variant v, int scale) {
  if (v == Variant::imdn) {
    switch (scale) {
      case 2: return Golden{694, 173, 34};
      case 3: return Golden{703, 78, 34};
      case 4: return Golden{715, 45, 34};
      default: return std::nullopt;
    }
  }
  if (scale != 4) return std::nullopt;
  switch (v) {
    case Variant::plain3_b4: return Golden{510, std::nullopt, std::nullopt};
    case Variant::basic_b4: return Golden{480, std::nullopt, std::nullopt};
    case Variant::basic_b4_cca: return Golden{482, std::nullopt, std::nullopt};
    case Variant::b4: return Golden{499, std::nullopt, std::nullopt};
    default: return std::nullopt;
  }
}

struct AnalyzeArgs {
  std::string variant = "imdn";
  int scale = 4;
  bool csv = false;
  bool assert_reference = false;
};

int run_analyze(const AnalyzeArgs& a) {
  const Variant v = variant_or_throw(a.variant);
  const Model model = build_variant(v, a.scale);
  const CostReport report = analyze(model);
  if (a.csv)
    write_report_csv(std::cout, report);
  else
    write_report_text(std::cout, report);

  const std::int64_t params_k = round_to_k(static_cast<double>(report.total_params));
  const std::int64_t macs_k = round_to_k(report.macs_per_hr_pixel);
  std::ostringstream summary;
  summary << a.variant << " x" << a.scale << ": " << params_k << "K, depth " << report.depth
          << ", " << macs_k << "K·m²";
  std::cout << summary.str() << '\n';
  if (!a.assert_reference) return 0;

  const std::optional<Golden> g = reference_values(v, a.scale);
  if (!g) fail(ErrorCode::invalid_argument, "no reference values for " + a.variant + " x" +
                                                std::to_string(a.scale));
  bool ok = true;
  if (params_k != g->params_k) {
    std::cerr << "mismatch: params " << params_k << "K, expected " << g->params_k << "K\n";
    ok = false;
  }
  if (g->macs_k && macs_k != *g->macs_k) {
    std::cerr << "mismatch: macs " << macs_k << "K, expected " << *g->macs_k << "K\n";
    ok = false;
  }
  if (g->depth && report.depth != *g->depth) {
    std::cerr << "mismatch: depth " << report.depth << ", expected " << *g->depth << '\n';
    ok = false;
  }
  if (v == Variant::imdn && std::round(report.total_params / 1e5) / 10.0 != 0.7) {
    std::cerr << "mismatch: params do not round to 0.7M\n";
    ok = false;
  }
  std::cout << (ok ? "matches reference values" : "DOES NOT match reference values") << '\n';
  return ok ? 0 : kExitFailed;
}

// ---- check-grad --------------------------------------------------------

struct GradArgs {
  std::uint64_t seed = 0;
  std::string break_op;
};

int run_check_grad(const GradArgs& a) {
  ag::debug::set_corrupted_backward(a.break_op);
  GradCheckOptions opts;
  opts.seed = a.seed;
  const GradCheckReport report = run_gradcheck_suite(opts);
  ag::debug::set_corrupted_backward("");
  for (const GradCheckCase& c : report.cases)
    std::cout << std::left << std::setw(26) << c.name << std::scientific << std::setprecision(3)
              << c.max_rel_error << "  worst " << c.worst_analytic << " vs " << c.worst_numeric
              << "  (" << c.probes << " probes, " << c.rejected
              << " redrawn)\n";
  std::cout << "max relative error " << report.max_rel_error() << " (tolerance "
            << kGradTolerance << ")\n";
  return report.passed(kGradTolerance) ? 0 : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lightweight multi-distillation super-resolution network"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train on a directory of HR PNG images");
  t->add_option("--data", train.data, "Directory of HR PNG images")->required()->check(CLI::ExistingDirectory);
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--scale", train.scale, "Upscaling factor")->capture_default_str();
  t->add_option("--steps", train.steps, "Training iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
  t->add_option("--blocks", train.blocks, "Number of blocks (default: the variant's)");
  t->add_option("--channels", train.channels, "Feature width (default: the variant's)");
  t->add_option("--variant", train.variant, "Architecture")->capture_default_str();
  t->add_option("--seed", train.seed, "RNG seed")->capture_default_str();
  t->add_option("--lr", train.config.learning_rate, "Initial learning rate")->capture_default_str();
  t->add_option("--halve-every", train.config.halve_every, "Learning-rate halving period")->capture_default_str();
  t->add_option("--batch", train.config.batch_size, "Batch size")->capture_default_str();
  t->add_option("--patch", train.config.hr_patch, "HR patch side")->capture_default_str();
  t->add_flag("--no-augment", train.no_augment, "Disable flips and rotations");
  t->add_option("--log-every", train.log_every, "Print the loss every N steps");

  SrArgs sr;
  auto* s = app.add_subcommand("sr", "Super-resolve one PNG with a standard network");
  s->add_option("--weights", sr.weights)->required()->check(CLI::ExistingFile);
  s->add_option("--input", sr.input)->required()->check(CLI::ExistingFile);
  s->add_option("--output", sr.output)->required();
  s->add_option("--scale", sr.scale, "Expected scale; must match the weights");

  SrArgs any;
  auto* sa = app.add_subcommand("sr-any", "Same-size inference with an any-scale network and 4 tiles");
  sa->add_option("--weights", any.weights)->required()->check(CLI::ExistingFile);
  sa->add_option("--input", any.input)->required()->check(CLI::ExistingFile);
  sa->add_option("--output", any.output)->required();
  sa->add_option("--padding", any.padding, "Tile overlap, a multiple of 4")->capture_default_str();
  sa->add_option("--resize", any.resize, "Bicubic pre-resize factor")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "PSNR/SSIM on the Y channel over a directory");
  e->add_option("--data", ev.data)->required()->check(CLI::ExistingDirectory);
  e->add_option("--weights", ev.weights)->check(CLI::ExistingFile);
  e->add_flag("--identity", ev.identity, "Score each HR image against itself");
  e->add_option("--scale", ev.scale, "Scale (taken from standard weights when omitted)");
  e->add_option("--shave", ev.shave, "Border crop (default: the scale)");
  e->add_option("--csv", ev.csv, "Write the report here instead of stdout");

  AnalyzeArgs an;
  auto* z = app.add_subcommand("analyze", "Parameter, MAC and depth report");
  z->add_option("--variant", an.variant)->capture_default_str();
  z->add_option("--scale", an.scale)->capture_default_str()->check(CLI::Range(1, 8));
  z->add_flag("--csv", an.csv, "Per-layer CSV instead of text");
  z->add_flag("--assert-reference", an.assert_reference, "Fail unless rounded values match the reference figures");

  GradArgs gr;
  auto* g = app.add_subcommand("check-grad", "Finite-difference gradient suite");
  g->add_option("--seed", gr.seed)->capture_default_str();
  g->add_option("--break-op", gr.break_op, "Corrupt one op's backward (negative control)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*t) return run_train(train);
    if (*s) return run_sr(sr);
    if (*sa) return run_sr_any(any);
    if (*e) return run_eval(ev);
    if (*z) return run_analyze(an);
    if (*g) return run_check_grad(gr);
  } catch (const CLI::Error& err) {
    return app.exit(err);
  } catch (const Error& err) {
    std::cerr << "error [" << to_string(err.code()) << "]: " << err.what() << '\n';
    return kExitError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitError;
  }
  return 0;
}
