#include "imdn/metrics.hpp"

#include <cmath>
#include <limits>

namespace imdn {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

Tensor shaved_plane(const Tensor& p, int shave, const char* op) {
  if (p.n() != 1 || p.c() != 1)
    fail(ErrorCode::shape_mismatch, std::string(op) + ": expected a single plane");
  if (shave < 0) fail(ErrorCode::invalid_argument, std::string(op) + ": shave must be >= 0");
  if (p.h() <= 2 * shave || p.w() <= 2 * shave)
    fail(ErrorCode::invalid_argument, std::string(op) + ": shave removes the whole image");
  return crop(p, shave, shave, p.h() - 2 * shave, p.w() - 2 * shave);
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    fail(ErrorCode::shape_mismatch, std::string(op) + ": " + to_string(a.shape()) + " vs " +
                                        to_string(b.shape()));
}

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow * kWindow);
  double total = 0.0;
  const int half = kWindow / 2;
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j) {
      const double d2 = static_cast<double>((i - half) * (i - half) + (j - half) * (j - half));
      g[i * kWindow + j] = std::exp(-d2 / (2.0 * kSigma * kSigma));
      total += g[i * kWindow + j];
    }
  for (double& v : g) v /= total;
  return g;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, int shave) {
  require_same_dims(a, b, "psnr");
  const Tensor x = shaved_plane(a, shave, "psnr");
  const Tensor y = shaved_plane(b, shave, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) se += (x[i] - y[i]) * (x[i] - y[i]);
  const double mse = se / static_cast<double>(x.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

// Mean of the local SSIM map over all fully-contained Gaussian windows.
double ssim(const Tensor& a, const Tensor& b, int shave) {
  require_same_dims(a, b, "ssim");
  const Tensor x = shaved_plane(a, shave, "ssim");
  const Tensor y = shaved_plane(b, shave, "ssim");
  if (x.h() < kWindow || x.w() < kWindow)
    fail(ErrorCode::invalid_argument, "ssim: image smaller than the 11x11 window after shave");
  static const std::vector<double> window = gaussian_window();
  const int oh = x.h() - kWindow + 1;
  const int ow = x.w() - kWindow + 1;
  double total = 0.0;
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
      for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) {
          const double w = window[i * kWindow + j];
          const double xv = x.at(0, 0, r + i, c + j);
          const double yv = y.at(0, 0, r + i, c + j);
          mx += w * xv;
          my += w * yv;
          mxx += w * (xv * xv);
          myy += w * (yv * yv);
          mxy += w * (xv * yv);
        }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double cov = mxy - mx * my;
      total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
    }
  return total / (static_cast<double>(oh) * ow);
}

double psnr_y(const ImageBuffer& sr, const ImageBuffer& hr, int shave) {
  if (sr.height != hr.height || sr.width != hr.width)
    fail(ErrorCode::shape_mismatch, "psnr_y: image dimensions differ");
  return psnr(rgb_to_y(sr), rgb_to_y(hr), shave);
}

double ssim_y(const ImageBuffer& sr, const ImageBuffer& hr, int shave) {
  if (sr.height != hr.height || sr.width != hr.width)
    fail(ErrorCode::shape_mismatch, "ssim_y: image dimensions differ");
  return ssim(rgb_to_y(sr), rgb_to_y(hr), shave);
}

EvalReport summarize(std::vector<ImageScore> scores, int shave) {
  EvalReport report;
  report.shave = shave;
  report.images = std::move(scores);
  if (report.images.empty()) return report;
  double p = 0.0, s = 0.0;
  for (const ImageScore& sc : report.images) {
    p += sc.psnr_db;
    s += sc.ssim;
  }
  report.mean_psnr_db = p / static_cast<double>(report.images.size());
  report.mean_ssim = s / static_cast<double>(report.images.size());
  return report;
}

}  // namespace imdn
