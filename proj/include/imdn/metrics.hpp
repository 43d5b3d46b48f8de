#pragma once

#include <string>
#include <vector>

#include "imdn/image.hpp"

namespace imdn {

struct ImageScore {
  std::string name;
  double psnr_db = 0.0;  // +inf for identical inputs
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<ImageScore> images;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
  int shave = 0;
};

// Planes are (1, 1, H, W) with values in [0, 1].
double psnr(const Tensor& a, const Tensor& b, int shave);
double ssim(const Tensor& a, const Tensor& b, int shave);

double psnr_y(const ImageBuffer& sr, const ImageBuffer& hr, int shave);
double ssim_y(const ImageBuffer& sr, const ImageBuffer& hr, int shave);

// Means are taken in row order.
EvalReport summarize(std::vector<ImageScore> scores, int shave);

}  // namespace imdn
