// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "imdn/complexity.hpp"
#include "imdn/gradcheck.hpp"
#include "imdn/metrics.hpp"
#include "imdn/tiler.hpp"
#include "imdn/train.hpp"

using namespace imdn;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;
std::vector<int> selected;  // empty: run everything

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) o.expect(false, "runtime " + fmt("%.1f", secs) + " s over budget");
  if (!o.ok) ++failures;
  std::printf("%s criterion %d: %s [%.2f s] %s\n", o.ok ? "PASS" : "FAIL", id, title, secs,
              o.detail.c_str());
  std::fflush(stdout);
}

std::string k(std::int64_t v) { return std::to_string(v) + " (" + std::to_string(round_to_k(static_cast<double>(v))) + "K)"; }

// 64x64 synthetic HR image with content above the x2 LR Nyquist limit: hard
// edged shapes, a fine diagonal grating and a 3-pixel checkerboard.
ImageBuffer synthetic_hr() {
  ImageBuffer img(64, 64);
  const double pi = 3.14159265358979323846;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      double v[3] = {0.45, 0.4, 0.5};
      if (r >= 6 && r < 26 && c >= 8 && c < 30) v[0] = 0.9, v[1] = 0.2;                // block
      if ((r - 44) * (r - 44) + (c - 18) * (c - 18) < 120) v[1] = 0.85, v[2] = 0.15;   // disc
      if (c >= 36 && r < 30) {                                                         // grating
        const double g = 0.5 + 0.45 * std::sin(2 * pi * (r + c) / 5.0);
        v[0] = g;
        v[1] = 1.0 - g;
      }
      if (c >= 36 && r >= 34) {                                                        // checks
        const double t = ((r / 3 + c / 3) % 2) ? 0.85 : 0.1;
        v[0] = t;
        v[2] = 1.0 - t;
      }
      if (r == c && c < 36) v[0] = v[1] = v[2] = 1.0;  // line
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = static_cast<std::uint8_t>(std::lround(std::clamp(v[ch], 0.0, 1.0) * 255.0));
    }
  return img;
}

}  // namespace

// Optional arguments pick criteria by number, e.g. `imdn_acceptance 4 6`.
int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  criterion(1, "IMDN parameter counts", 1.0, [] {
    Outcome o;
    const std::int64_t want[] = {0, 0, 694404, 703059, 715176};
    const std::int64_t expected_k[] = {0, 0, 694, 703, 715};
    for (int s : {2, 3, 4}) {
      const std::int64_t got = count_params(build_imdn(config_for(Variant::imdn, s)));
      o.detail += (s == 2 ? "" : ", ") + std::string("x") + std::to_string(s) + " " + k(got);
      o.expect(got == want[s], "x" + std::to_string(s) + " exact count");
      o.expect(round_to_k(static_cast<double>(got)) == expected_k[s], "x" + std::to_string(s) + " K rounding");
    }
    return o;
  });

  criterion(2, "ablation parameter counts", 1.0, [] {
    Outcome o;
    const std::pair<Variant, std::int64_t> rows[] = {{Variant::plain3_b4, 509552},
                                                     {Variant::basic_b4, 480176},
                                                     {Variant::basic_b4_cca, 482496},
                                                     {Variant::b4, 498944}};
    const std::int64_t expected_k[] = {510, 480, 482, 499};
    for (std::size_t i = 0; i < 4; ++i) {
      const std::int64_t got = count_params(build_ablation(rows[i].first, 4));
      const std::string name(to_string(rows[i].first));
      o.detail += (i ? ", " : "") + name + " " + k(got);
      o.expect(got == rows[i].second, name + " exact count");
      o.expect(round_to_k(static_cast<double>(got)) == expected_k[i], name + " K rounding");
    }
    return o;
  });

  criterion(3, "MAC coefficients and depth", 1.0, [] {
    Outcome o;
    const double want[] = {0, 0, 173040.0, 700800.0 / 9.0, 44556.0};
    const std::int64_t expected_k[] = {0, 0, 173, 78, 45};
    for (int s : {2, 3, 4}) {
      const Model m = build_imdn(config_for(Variant::imdn, s));
      const double macs = count_macs(m);
      o.detail += (s == 2 ? "" : ", ") + std::string("x") + std::to_string(s) + " " +
                  fmt("%.2f", macs) + "·m²";
      o.expect(std::abs(macs - want[s]) <= 1e-9 * want[s], "x" + std::to_string(s) + " exact MACs");
      o.expect(round_to_k(macs) == expected_k[s], "x" + std::to_string(s) + " K rounding");
      o.expect(depth(m) == 34, "depth x" + std::to_string(s));
    }
    o.detail += ", depth " + std::to_string(depth(build_imdn(ImdnConfig{})));
    return o;
  });

  criterion(4, "finite-difference gradient suite", 120.0, [] {
    Outcome o;
    const GradCheckReport r = run_gradcheck_suite({});
    o.detail = "max rel error " + fmt("%.3e", r.max_rel_error()) + " over " +
               std::to_string(r.cases.size()) + " cases";
    o.expect(r.passed(1e-4), "max rel error >= 1e-4");
    ag::debug::set_corrupted_backward("conv2d");
    const bool control_fails = !run_gradcheck_suite({}).passed(1e-4);
    ag::debug::set_corrupted_backward("");
    o.expect(control_fails, "corrupted conv2d backward was not detected");
    return o;
  });

  criterion(5, "adaptive cropping", 60.0, [] {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> extent(8, 500);
    int layouts = 0;
    int refused = 0;
    for (int trial = 0; trial < 2000; ++trial) {
      const int h = extent(rng);
      const int w = extent(rng);
      for (int p : {4, 8, 12}) {
        std::array<TileSpec, 4> tiles;
        try {
          tiles = compute_tiles(h, w, p);
        } catch (const Error&) {
          ++refused;
          continue;
        }
        ++layouts;
        std::vector<unsigned char> cover(static_cast<std::size_t>(h) * w, 0);
        for (const TileSpec& t : tiles) {
          if (t.source.rows % 4 || t.source.cols % 4) o.expect(false, "(a) tile side not divisible by 4");
          for (int r = 0; r < t.paste.rows; ++r)
            for (int c = 0; c < t.paste.cols; ++c)
              ++cover[static_cast<std::size_t>(t.paste.row0 + r) * w + t.paste.col0 + c];
        }
        for (unsigned char v : cover)
          if (v != 1) {
            o.expect(false, "(b) paste rects do not partition " + std::to_string(h) + "x" + std::to_string(w));
            break;
          }
      }
    }
    ImdnConfig c = ImdnConfig::narrow(8, 1, 1);
    c.use_cca = false;
    c.topology = Topology::any_scale;
    Model m(c);
    init_weights(m, 5);
    const int radius = *receptive_radius(m);
    const int padding = padding_for_radius(104, 104, radius);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor x({1, 3, 104, 104});
    for (double& v : x.data()) v = u(rng);
    const double diff = max_abs_diff(m.forward(x), tiled_forward(m, x, padding));
    o.expect(diff <= 1e-9, "(c) tiled differs from whole by " + fmt("%.3e", diff));
    o.detail = std::to_string(layouts) + " layouts checked (" + std::to_string(refused) +
               " too small for the padding), radius " + std::to_string(radius) + ", padding " +
               std::to_string(padding) + ", max |tiled - whole| " + fmt("%.3e", diff) +
               (o.detail.empty() ? "" : "; " + o.detail);
    return o;
  });

  criterion(6, "toy training convergence", 900.0, [] {
    Outcome o;
    const ImageBuffer hr = synthetic_hr();
    const std::vector<TrainingImage> data{make_training_image(hr, 2)};
    Model m = build_imdn(ImdnConfig::narrow(32, 2, 2));
    init_weights(m, 1);
    TrainConfig tc;
    tc.batch_size = 1;
    tc.hr_patch = 64;
    tc.augment = {false, false};
    const auto history = train_loop(m, data, tc, {1000, 1, {}});
    const double first = history.front().loss;
    const double last = history.back().loss;

    const ImageBuffer lr = tensor_to_image(data.front().input);
    const ImageBuffer sr = tensor_to_image(m.forward(data.front().input));
    const ImageBuffer bic = bicubic_resize(lr, hr.height, hr.width);
    const double p_sr = psnr_y(sr, hr, 2);
    const double p_bic = psnr_y(bic, hr, 2);
    o.detail = "loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + " (" +
               fmt("%.1f", 100.0 * last / first) + "%), PSNR-Y " + fmt("%.2f", p_sr) +
               " dB vs bicubic " + fmt("%.2f", p_bic) + " dB";
    o.expect(last <= 0.1 * first, "loss above 10% of step 1");
    o.expect(p_sr - p_bic >= 3.0, "PSNR gain below 3 dB");
    return o;
  });

  criterion(7, "metric oracles", 10.0, [] {
    Outcome o;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 0.8);
    Tensor a({1, 1, 48, 48});
    for (double& v : a.data()) v = u(rng);
    Tensor b = a;
    for (double& v : b.data()) v += 0.1;
    const double p = psnr(a, b, 4);
    o.expect(std::abs(p - 20.0) <= 1e-3, "psnr " + fmt("%.6f", p));

    ImageBuffer img(48, 40);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& px : img.pixels) px = static_cast<std::uint8_t>(byte(rng));
    const double s = ssim_y(img, img, 4);
    o.expect(s == 1.0, "ssim(x, x) = " + fmt("%.17g", s));

    double worst = 0.0;
    for (auto [h, w, oh, ow] : {std::array{64, 64, 32, 32}, std::array{17, 23, 51, 69},
                                std::array{101, 77, 34, 26}, std::array{9, 9, 36, 36}})
      for (bool aa : {true, false}) {
        const Tensor y = bicubic_resize(Tensor({1, 3, h, w}, 0.7), oh, ow, aa);
        worst = std::max(worst, max_abs_diff(y, Tensor(y.shape(), 0.7)));
      }
    o.expect(worst <= 1e-12, "bicubic constant error " + fmt("%.3e", worst));
    o.detail = "psnr " + fmt("%.6f", p) + " dB, ssim(x,x) " + fmt("%.17g", s) +
               ", bicubic constant error " + fmt("%.1e", worst) + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
  });

  criterion(8, "determinism and serialization", 60.0, [] {
    Outcome o;
    const std::vector<TrainingImage> data{make_training_image(synthetic_hr(), 2)};
    TrainConfig tc;
    tc.batch_size = 2;
    tc.hr_patch = 32;
    const auto dir = std::filesystem::temp_directory_path() / "imdn_acceptance";
    std::filesystem::create_directories(dir);
    auto run = [&](const std::string& file) {
      Model m = build_imdn(ImdnConfig::narrow(16, 2, 2));
      init_weights(m, 9);
      train_loop(m, data, tc, {20, 9, {}});
      save_weights(m, dir / file);
      std::ifstream in(dir / file, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)), {});
    };
    const std::string a = run("a.imdnw");
    const std::string b = run("b.imdnw");
    o.expect(!a.empty() && a == b, "same seed produced different weight files");

    const Model loaded = load_weights(dir / "a.imdnw");
    Model fresh = build_imdn(ImdnConfig::narrow(16, 2, 2));
    init_weights(fresh, 9);
    train_loop(fresh, data, tc, {20, 9, {}});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor x({1, 3, 19, 23});
    for (double& v : x.data()) v = u(rng);
    o.expect(loaded.forward(x) == fresh.forward(x), "forward differs after round trip");
    std::filesystem::remove_all(dir);
    const std::string failed = o.detail;
    o.detail = std::to_string(a.size()) + "-byte weight files, reload compared on a 19x23 input" +
               (failed.empty() ? "" : "; " + failed);
    return o;
  });

  return failures == 0 ? 0 : 1;
}
