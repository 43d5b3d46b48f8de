#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "imdn/tensor.hpp"

namespace imdn {

// 8-bit RGB raster, row-major, channels interleaved.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, std::uint8_t fill = 0);

  std::uint8_t& at(int row, int col, int ch) {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  std::uint8_t at(int row, int col, int ch) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

// Grayscale and palette files load as RGB; alpha and 16-bit files are rejected.
ImageBuffer load_png(const std::filesystem::path& path);
void save_png(const ImageBuffer& image, const std::filesystem::path& path);

// (1, 3, H, W) in [0, 1].
Tensor image_to_tensor(const ImageBuffer& image);
// Clamps to [0, 1] and rounds to the nearest 8-bit level.
ImageBuffer tensor_to_image(const Tensor& t, int batch_index = 0);

// BT.601 studio-swing luma of [0, 1] RGB, in [16/255, 235/255]. (N, 3, H, W) -> (N, 1, H, W).
Tensor rgb_to_y(const Tensor& rgb);
Tensor rgb_to_y(const ImageBuffer& image);

// Cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

// Separable bicubic resampling of every plane. With antialias on and a
// downscale, the kernel is stretched by 1/scale. Out-of-range taps clamp to
// the nearest edge pixel.
Tensor bicubic_resize(const Tensor& x, int out_h, int out_w, bool antialias = true);
ImageBuffer bicubic_resize(const ImageBuffer& image, int out_h, int out_w, bool antialias = true);

// Crops so both dimensions are multiples of `multiple` (anchored top-left).
ImageBuffer mod_crop(const ImageBuffer& image, int multiple);

}  // namespace imdn
