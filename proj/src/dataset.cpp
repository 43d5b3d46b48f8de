#include "imdn/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>

namespace imdn {

TrainingImage make_training_image(const ImageBuffer& hr, int scale, bool same_size,
                                  std::string name) {
  if (scale < 1) fail(ErrorCode::invalid_argument, "make_training_image: scale must be positive");
  const ImageBuffer cropped = mod_crop(hr, scale);
  ImageBuffer lr = bicubic_resize(cropped, cropped.height / scale, cropped.width / scale, true);
  TrainingImage out;
  out.name = std::move(name);
  out.target = image_to_tensor(cropped);
  if (same_size) {
    lr = bicubic_resize(lr, cropped.height, cropped.width, true);
    out.ratio = 1;
  } else {
    out.ratio = scale;
  }
  out.input = image_to_tensor(lr);
  return out;
}

Tensor flip_horizontal(const Tensor& x) {
  Tensor out(x.shape());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int h = 0; h < x.h(); ++h)
        for (int w = 0; w < x.w(); ++w) out.at(n, c, h, x.w() - 1 - w) = x.at(n, c, h, w);
  return out;
}

Tensor rotate90(const Tensor& x) {
  Tensor out({x.n(), x.c(), x.w(), x.h()});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int h = 0; h < x.h(); ++h)
        for (int w = 0; w < x.w(); ++w) out.at(n, c, x.w() - 1 - w, h) = x.at(n, c, h, w);
  return out;
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) fail(ErrorCode::invalid_argument, "stack_batch: no items");
  const Shape ref = items.front().shape();
  int batch = 0;
  for (const Tensor& t : items) {
    if (t.c() != ref.c || t.h() != ref.h || t.w() != ref.w)
      fail(ErrorCode::shape_mismatch, "stack_batch: item shapes differ");
    batch += t.n();
  }
  Tensor out({batch, ref.c, ref.h, ref.w});
  double* dst = out.data().data();
  for (const Tensor& t : items) dst = std::copy(t.data().begin(), t.data().end(), dst);
  return out;
}

PatchPair sample_patch_pair(const TrainingImage& image, int target_patch, std::mt19937_64& rng,
                            const PatchOptions& options) {
  const int ratio = image.ratio;
  if (target_patch < 1 || target_patch % ratio != 0)
    fail(ErrorCode::invalid_argument, "sample_patch_pair: patch " + std::to_string(target_patch) +
                                          " not divisible by scale " + std::to_string(ratio));
  const int in_patch = target_patch / ratio;
  if (image.input.h() < in_patch || image.input.w() < in_patch)
    fail(ErrorCode::invalid_argument, "sample_patch_pair: image " + to_string(image.target.shape()) +
                                          " smaller than patch " + std::to_string(target_patch));
  int row = 0;
  int col = 0;
  if (options.anchor) {
    std::tie(row, col) = *options.anchor;
  } else {
    std::uniform_int_distribution<int> rows(0, image.input.h() - in_patch);
    std::uniform_int_distribution<int> cols(0, image.input.w() - in_patch);
    row = rows(rng);
    col = cols(rng);
  }
  PatchPair pair;
  pair.input = crop(image.input, row, col, in_patch, in_patch);
  pair.target = crop(image.target, row * ratio, col * ratio, target_patch, target_patch);
  // Draw both coins unconditionally so the stream does not depend on the flags.
  std::bernoulli_distribution coin(0.5);
  const bool flip = coin(rng);
  const bool rot = coin(rng);
  if (options.augment.horizontal_flip && flip) {
    pair.input = flip_horizontal(pair.input);
    pair.target = flip_horizontal(pair.target);
  }
  if (options.augment.rotate90 && rot) {
    pair.input = rotate90(pair.input);
    pair.target = rotate90(pair.target);
  }
  return pair;
}

std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    fail(ErrorCode::io_failure, "'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace imdn
