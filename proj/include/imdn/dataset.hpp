#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "imdn/image.hpp"
#include "imdn/optim.hpp"

namespace imdn {

// One HR image with its synthesized network input, both as (1, 3, H, W) tensors.
// `ratio` is target size over input size: the SR scale, or 1 when the input
// was resized back up to the HR grid.
struct TrainingImage {
  std::string name;
  Tensor input;
  Tensor target;
  int ratio = 1;
};

// HR is mod-cropped to the scale, downscaled with antialiased bicubic and
// quantized to 8 bits. With `same_size`, the LR image is bicubic-upscaled back
// to the HR grid.
TrainingImage make_training_image(const ImageBuffer& hr, int scale, bool same_size = false,
                                  std::string name = {});

struct PatchPair {
  Tensor input;
  Tensor target;
};

struct PatchOptions {
  Augment augment;
  // Input-grid anchor (row, col); random when unset.
  std::optional<std::pair<int, int>> anchor;
};

// Aligned crop: input window at (r, c) of side target_patch / ratio pairs with
// target window at (r * ratio, c * ratio). The same flip/rotation goes to both.
PatchPair sample_patch_pair(const TrainingImage& image, int target_patch, std::mt19937_64& rng,
                            const PatchOptions& options = {});

Tensor flip_horizontal(const Tensor& x);
// Counter-clockwise quarter turn of every plane.
Tensor rotate90(const Tensor& x);
// Concatenates along the batch dimension.
Tensor stack_batch(std::span<const Tensor> items);

std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

}  // namespace imdn
