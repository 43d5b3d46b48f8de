#include "imdn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace imdn {

ImageBuffer::ImageBuffer(int h, int w, std::uint8_t fill) : height(h), width(w) {
  if (h < 0 || w < 0) fail(ErrorCode::invalid_argument, "image dimensions must be non-negative");
  pixels.assign(static_cast<std::size_t>(h) * w * 3, fill);
}

ImageBuffer load_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  const std::string p = path.string();
  if (!png_image_begin_read_from_file(&img, p.c_str()))
    fail(ErrorCode::io_failure, "cannot read PNG '" + p + "': " + img.message);
  if (img.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&img);
    fail(ErrorCode::bad_format, "'" + p + "': 16-bit PNG is not supported");
  }
  if (img.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&img);
    fail(ErrorCode::bad_format, "'" + p + "': PNG with alpha channel is not supported");
  }
  img.format = PNG_FORMAT_RGB;
  ImageBuffer out(static_cast<int>(img.height), static_cast<int>(img.width));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr))
    fail(ErrorCode::bad_format, "cannot decode PNG '" + p + "': " + img.message);
  return out;
}

void save_png(const ImageBuffer& image, const std::filesystem::path& path) {
  if (image.height < 1 || image.width < 1)
    fail(ErrorCode::invalid_argument, "cannot write an empty image");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  const std::string p = path.string();
  if (!png_image_write_to_file(&img, p.c_str(), 0, image.pixels.data(), 0, nullptr))
    fail(ErrorCode::io_failure, "cannot write PNG '" + p + "': " + img.message);
}

Tensor image_to_tensor(const ImageBuffer& image) {
  Tensor t({1, 3, image.height, image.width});
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < image.height; ++r)
      for (int col = 0; col < image.width; ++col)
        t.at(0, c, r, col) = image.at(r, col, c) / 255.0;
  return t;
}

ImageBuffer tensor_to_image(const Tensor& t, int batch_index) {
  if (t.c() != 3) fail(ErrorCode::shape_mismatch, "tensor_to_image: expected 3 channels");
  ImageBuffer img(t.h(), t.w());
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < t.h(); ++r)
      for (int col = 0; col < t.w(); ++col) {
        const double v = std::clamp(t.at(batch_index, c, r, col), 0.0, 1.0);
        img.at(r, col, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return img;
}

Tensor rgb_to_y(const Tensor& rgb) {
  if (rgb.c() != 3) fail(ErrorCode::shape_mismatch, "rgb_to_y: expected 3 channels");
  Tensor y({rgb.n(), 1, rgb.h(), rgb.w()});
  const std::size_t area = rgb.shape().plane();
  for (int n = 0; n < rgb.n(); ++n) {
    const double* r = rgb.plane(n, 0);
    const double* g = rgb.plane(n, 1);
    const double* b = rgb.plane(n, 2);
    double* dst = y.plane(n, 0);
    for (std::size_t i = 0; i < area; ++i)
      dst[i] = (65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i] + 16.0) / 255.0;
  }
  return y;
}

Tensor rgb_to_y(const ImageBuffer& image) { return rgb_to_y(image_to_tensor(image)); }

double cubic_kernel(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

namespace {

struct Taps {
  int count = 0;                 // taps per output sample
  std::vector<int> index;        // out * count, clamped source indices
  std::vector<double> weight;    // out * count, normalized
};

// Output sample i (0-based) maps to source coordinate (i + 0.5) / scale - 0.5.
Taps make_taps(int in, int out, bool antialias) {
  const double scale = static_cast<double>(out) / in;
  const bool stretch = antialias && scale < 1.0;
  const double support = stretch ? 2.0 / scale : 2.0;
  Taps taps;
  taps.count = static_cast<int>(std::ceil(2.0 * support)) + 2;
  taps.index.resize(static_cast<std::size_t>(out) * taps.count);
  taps.weight.resize(static_cast<std::size_t>(out) * taps.count);
  for (int i = 0; i < out; ++i) {
    const double center = (i + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(center - support));
    double total = 0.0;
    for (int t = 0; t < taps.count; ++t) {
      const int src = left + t;
      const double d = center - src;
      const double w = stretch ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      taps.index[static_cast<std::size_t>(i) * taps.count + t] = std::clamp(src, 0, in - 1);
      taps.weight[static_cast<std::size_t>(i) * taps.count + t] = w;
      total += w;
    }
    for (int t = 0; t < taps.count; ++t) taps.weight[static_cast<std::size_t>(i) * taps.count + t] /= total;
  }
  return taps;
}

}  // namespace

Tensor bicubic_resize(const Tensor& x, int out_h, int out_w, bool antialias) {
  if (out_h < 1 || out_w < 1)
    fail(ErrorCode::invalid_argument, "bicubic_resize: output dimensions must be positive");
  if (x.h() < 1 || x.w() < 1) fail(ErrorCode::invalid_argument, "bicubic_resize: empty input");
  const Taps rows = make_taps(x.h(), out_h, antialias);
  const Taps cols = make_taps(x.w(), out_w, antialias);
  Tensor out({x.n(), x.c(), out_h, out_w});
  std::vector<double> tmp(static_cast<std::size_t>(x.h()) * out_w);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const double* src = x.plane(n, c);
      // Horizontal pass into tmp (in_h x out_w), then vertical.
      for (int r = 0; r < x.h(); ++r)
        for (int j = 0; j < out_w; ++j) {
          double s = 0.0;
          for (int t = 0; t < cols.count; ++t) {
            const std::size_t k = static_cast<std::size_t>(j) * cols.count + t;
            s += cols.weight[k] * src[static_cast<std::size_t>(r) * x.w() + cols.index[k]];
          }
          tmp[static_cast<std::size_t>(r) * out_w + j] = s;
        }
      double* dst = out.plane(n, c);
      for (int i = 0; i < out_h; ++i)
        for (int j = 0; j < out_w; ++j) {
          double s = 0.0;
          for (int t = 0; t < rows.count; ++t) {
            const std::size_t k = static_cast<std::size_t>(i) * rows.count + t;
            s += rows.weight[k] * tmp[static_cast<std::size_t>(rows.index[k]) * out_w + j];
          }
          dst[static_cast<std::size_t>(i) * out_w + j] = s;
        }
    }
  return out;
}

ImageBuffer bicubic_resize(const ImageBuffer& image, int out_h, int out_w, bool antialias) {
  return tensor_to_image(bicubic_resize(image_to_tensor(image), out_h, out_w, antialias));
}

ImageBuffer mod_crop(const ImageBuffer& image, int multiple) {
  if (multiple < 1) fail(ErrorCode::invalid_argument, "mod_crop: multiple must be positive");
  const int h = image.height - image.height % multiple;
  const int w = image.width - image.width % multiple;
  if (h < 1 || w < 1)
    fail(ErrorCode::invalid_argument, "mod_crop: image smaller than " + std::to_string(multiple));
  ImageBuffer out(h, w);
  for (int r = 0; r < h; ++r)
    std::copy_n(image.pixels.data() + static_cast<std::size_t>(r) * image.width * 3,
                static_cast<std::size_t>(w) * 3,
                out.pixels.data() + static_cast<std::size_t>(r) * w * 3);
  return out;
}

}  // namespace imdn
