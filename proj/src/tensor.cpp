#include "imdn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "imdn/kernels.hpp"

namespace imdn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::bad_format: return "bad_format";
    case ErrorCode::graph_cycle: return "graph_cycle";
  }
  return "unknown";
}

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s.n << "x" << s.c << "x" << s.h << "x" << s.w;
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
    fail(ErrorCode::invalid_argument, "negative tensor dimension in " + to_string(shape));
  data_.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.numel())
    fail(ErrorCode::shape_mismatch, "data length does not match shape " + to_string(shape));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

ConvLayer make_conv(int in_channels, int out_channels, int kernel, int stride, int padding) {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0)
    fail(ErrorCode::invalid_argument, "conv layer dimensions must be positive");
  if (padding < 0) padding = kernel / 2;
  ConvLayer layer;
  layer.weight = Tensor({out_channels, in_channels, kernel, kernel});
  layer.bias = Tensor({1, out_channels, 1, 1});
  layer.geometry = {stride, padding};
  return layer;
}

int conv_output_extent(int extent, int kernel, ConvGeometry g) {
  const int span = extent + 2 * g.padding - kernel;
  if (span < 0) return 0;
  return span / g.stride + 1;
}

namespace {

void require_same_shape(const Tensor& x, const Tensor& y, const char* op) {
  if (x.shape() != y.shape())
    fail(ErrorCode::shape_mismatch, std::string(op) + ": shapes " + to_string(x.shape()) +
                                        " and " + to_string(y.shape()) + " differ");
}

bool is_pointwise(const Tensor& weight, ConvGeometry g) {
  return weight.h() == 1 && weight.w() == 1 && g.stride == 1 && g.padding == 0;
}

// col[(c*k + kh)*k + kw][oh*wo + ow]
void im2col(const double* in, int channels, int h, int w, int k, ConvGeometry g, int ho, int wo,
            double* col) {
  const std::size_t plane_out = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    const double* src = in + static_cast<std::size_t>(c) * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        double* dst = col + (static_cast<std::size_t>(c) * k * k + kh * k + kw) * plane_out;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * g.stride - g.padding + kh;
          double* row = dst + static_cast<std::size_t>(oh) * wo;
          if (ih < 0 || ih >= h) {
            std::fill(row, row + wo, 0.0);
            continue;
          }
          const double* srow = src + static_cast<std::size_t>(ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * g.stride - g.padding + kw;
            row[ow] = (iw >= 0 && iw < w) ? srow[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int channels, int h, int w, int k, ConvGeometry g, int ho, int wo,
            double* in) {
  const std::size_t plane_out = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    double* dst = in + static_cast<std::size_t>(c) * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        const double* src = col + (static_cast<std::size_t>(c) * k * k + kh * k + kw) * plane_out;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * g.stride - g.padding + kh;
          if (ih < 0 || ih >= h) continue;
          const double* row = src + static_cast<std::size_t>(oh) * wo;
          double* drow = dst + static_cast<std::size_t>(ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * g.stride - g.padding + kw;
            if (iw >= 0 && iw < w) drow[iw] += row[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvGeometry g) {
  if (weight.h() != weight.w())
    fail(ErrorCode::invalid_argument, "conv2d: only square kernels are supported");
  if (input.c() != weight.c())
    fail(ErrorCode::shape_mismatch, "conv2d: input has " + std::to_string(input.c()) +
                                        " channels, layer expects " + std::to_string(weight.c()));
  if (bias.numel() != static_cast<std::size_t>(weight.n()))
    fail(ErrorCode::shape_mismatch, "conv2d: bias length does not match out_channels");
  if (g.stride <= 0 || g.padding < 0)
    fail(ErrorCode::invalid_argument, "conv2d: stride must be positive and padding non-negative");
  const int k = weight.h();
  const int ho = conv_output_extent(input.h(), k, g);
  const int wo = conv_output_extent(input.w(), k, g);
  if (ho < 1 || wo < 1)
    fail(ErrorCode::invalid_argument, "conv2d: non-positive output size for input " +
                                          to_string(input.shape()));

  const int out_c = weight.n();
  const int in_c = weight.c();
  const int patch = in_c * k * k;
  const int plane_out = ho * wo;
  Tensor out({input.n(), out_c, ho, wo});
  std::vector<double> col;
  const bool pointwise = is_pointwise(weight, g);
  if (!pointwise) col.resize(static_cast<std::size_t>(patch) * plane_out);

  for (int n = 0; n < input.n(); ++n) {
    double* dst = out.plane(n, 0);
    for (int o = 0; o < out_c; ++o)
      std::fill(dst + static_cast<std::size_t>(o) * plane_out,
                dst + static_cast<std::size_t>(o + 1) * plane_out, bias[o]);
    const double* cols = input.plane(n, 0);
    if (!pointwise) {
      im2col(input.plane(n, 0), in_c, input.h(), input.w(), k, g, ho, wo, col.data());
      cols = col.data();
    }
    detail::gemm_accumulate(out_c, plane_out, patch, weight.data().data(), cols, dst);
  }
  return out;
}

Tensor conv2d(const Tensor& input, const ConvLayer& layer) {
  return conv2d(input, layer.weight, layer.bias, layer.geometry);
}

namespace detail {

void conv2d_backward(const Tensor& input, const Tensor& weight, ConvGeometry g,
                     const Tensor& grad_out, Tensor* grad_input, Tensor* grad_weight,
                     Tensor* grad_bias) {
  const int k = weight.h();
  const int out_c = weight.n();
  const int in_c = weight.c();
  const int ho = grad_out.h();
  const int wo = grad_out.w();
  const int patch = in_c * k * k;
  const int plane_out = ho * wo;
  const bool pointwise = is_pointwise(weight, g);

  std::vector<double> col;
  std::vector<double> col_t;
  std::vector<double> weight_t;
  std::vector<double> dcol;
  if (grad_weight) col_t.resize(static_cast<std::size_t>(patch) * plane_out);
  if (grad_weight && !pointwise) col.resize(static_cast<std::size_t>(patch) * plane_out);
  if (grad_input) {
    weight_t.resize(static_cast<std::size_t>(patch) * out_c);
    transpose(out_c, patch, weight.data().data(), weight_t.data());
    if (!pointwise) dcol.resize(static_cast<std::size_t>(patch) * plane_out);
  }

  for (int n = 0; n < input.n(); ++n) {
    const double* gout = grad_out.plane(n, 0);
    if (grad_bias) {
      for (int o = 0; o < out_c; ++o) {
        const double* row = gout + static_cast<std::size_t>(o) * plane_out;
        double s = 0.0;
        for (int p = 0; p < plane_out; ++p) s += row[p];
        (*grad_bias)[o] += s;
      }
    }
    if (grad_weight) {
      const double* cols = input.plane(n, 0);
      if (!pointwise) {
        im2col(input.plane(n, 0), in_c, input.h(), input.w(), k, g, ho, wo, col.data());
        cols = col.data();
      }
      transpose(patch, plane_out, cols, col_t.data());
      gemm_accumulate(out_c, patch, plane_out, gout, col_t.data(), grad_weight->data().data());
    }
    if (grad_input) {
      if (pointwise) {
        gemm_accumulate(patch, plane_out, out_c, weight_t.data(), gout, grad_input->plane(n, 0));
      } else {
        std::fill(dcol.begin(), dcol.end(), 0.0);
        gemm_accumulate(patch, plane_out, out_c, weight_t.data(), gout, dcol.data());
        col2im(dcol.data(), in_c, input.h(), input.w(), k, g, ho, wo, grad_input->plane(n, 0));
      }
    }
  }
}

}  // namespace detail

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0))
    fail(ErrorCode::invalid_argument, "leaky_relu: slope must lie in (0, 1)");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    // Split on sign so exp never overflows.
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int begin, int end) {
  if (begin < 0 || end > x.c() || begin >= end)
    fail(ErrorCode::invalid_argument, "slice_channels: range [" + std::to_string(begin) + ", " +
                                          std::to_string(end) + ") invalid for " +
                                          std::to_string(x.c()) + " channels");
  Tensor out({x.n(), end - begin, x.h(), x.w()});
  const std::size_t chunk = static_cast<std::size_t>(end - begin) * x.shape().plane();
  for (int n = 0; n < x.n(); ++n) std::copy_n(x.plane(n, begin), chunk, out.plane(n, 0));
  return out;
}

std::pair<Tensor, Tensor> channel_split(const Tensor& x, int first) {
  if (first <= 0 || first >= x.c())
    fail(ErrorCode::invalid_argument, "channel_split: split point " + std::to_string(first) +
                                          " must lie strictly inside (0, " +
                                          std::to_string(x.c()) + ")");
  return {slice_channels(x, 0, first), slice_channels(x, first, x.c())};
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorCode::invalid_argument, "concat_channels: no parts");
  const Shape& ref = parts.front().shape();
  int channels = 0;
  for (const Tensor& p : parts) {
    if (p.n() != ref.n || p.h() != ref.h || p.w() != ref.w)
      fail(ErrorCode::shape_mismatch, "concat_channels: part " + to_string(p.shape()) +
                                          " incompatible with " + to_string(ref));
    channels += p.c();
  }
  Tensor out({ref.n, channels, ref.h, ref.w});
  for (int n = 0; n < ref.n; ++n) {
    double* dst = out.plane(n, 0);
    for (const Tensor& p : parts) {
      const std::size_t chunk = static_cast<std::size_t>(p.c()) * ref.plane();
      dst = std::copy_n(p.plane(n, 0), chunk, dst);
    }
  }
  return out;
}

Tensor concat_channels(std::initializer_list<Tensor> parts) {
  return concat_channels(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor pixel_shuffle(const Tensor& x, int s) {
  if (s < 1) fail(ErrorCode::invalid_argument, "pixel_shuffle: scale must be positive");
  if (x.c() % (s * s) != 0)
    fail(ErrorCode::invalid_argument, "pixel_shuffle: " + std::to_string(x.c()) +
                                          " channels not divisible by " + std::to_string(s * s));
  const int oc = x.c() / (s * s);
  Tensor out({x.n(), oc, x.h() * s, x.w() * s});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < oc; ++c)
      for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) {
          const double* src = x.plane(n, c * s * s + i * s + j);
          for (int h = 0; h < x.h(); ++h)
            for (int w = 0; w < x.w(); ++w)
              out.at(n, c, h * s + i, w * s + j) = src[static_cast<std::size_t>(h) * x.w() + w];
        }
  return out;
}

Tensor pixel_unshuffle(const Tensor& x, int s) {
  if (s < 1 || x.h() % s != 0 || x.w() % s != 0)
    fail(ErrorCode::invalid_argument, "pixel_unshuffle: spatial size not divisible by scale");
  const int oh = x.h() / s;
  const int ow = x.w() / s;
  Tensor out({x.n(), x.c() * s * s, oh, ow});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) {
          double* dst = out.plane(n, c * s * s + i * s + j);
          for (int h = 0; h < oh; ++h)
            for (int w = 0; w < ow; ++w)
              dst[static_cast<std::size_t>(h) * ow + w] = x.at(n, c, h * s + i, w * s + j);
        }
  return out;
}

Tensor global_contrast_pool(const Tensor& x) {
  if (x.shape().plane() == 0)
    fail(ErrorCode::invalid_argument, "global_contrast_pool: empty spatial extent");
  Tensor out({x.n(), x.c(), 1, 1});
  const std::size_t area = x.shape().plane();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.plane(n, c);
      double sum = 0.0;
      for (std::size_t i = 0; i < area; ++i) sum += p[i];
      const double mean = sum / static_cast<double>(area);
      double sq = 0.0;
      for (std::size_t i = 0; i < area; ++i) sq += (p[i] - mean) * (p[i] - mean);
      out.at(n, c, 0, 0) = std::sqrt(sq / static_cast<double>(area)) + mean;
    }
  return out;
}

Tensor channel_scale(const Tensor& x, const Tensor& gates) {
  if (gates.n() != x.n() || gates.c() != x.c() || gates.h() != 1 || gates.w() != 1)
    fail(ErrorCode::shape_mismatch, "channel_scale: gates " + to_string(gates.shape()) +
                                        " do not match input " + to_string(x.shape()));
  Tensor out(x.shape());
  const std::size_t area = x.shape().plane();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const double g = gates.at(n, c, 0, 0);
      const double* src = x.plane(n, c);
      double* dst = out.plane(n, c);
      for (std::size_t i = 0; i < area; ++i) dst[i] = src[i] * g;
    }
  return out;
}

Tensor add(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "add");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] + y[i];
  return out;
}

Tensor sub(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "sub");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] - y[i];
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * factor;
  return out;
}

Tensor crop(const Tensor& x, int row0, int col0, int rows, int cols) {
  if (row0 < 0 || col0 < 0 || rows < 0 || cols < 0 || row0 + rows > x.h() || col0 + cols > x.w())
    fail(ErrorCode::invalid_argument, "crop: window outside tensor " + to_string(x.shape()));
  Tensor out({x.n(), x.c(), rows, cols});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int r = 0; r < rows; ++r)
        std::copy_n(x.plane(n, c) + static_cast<std::size_t>(row0 + r) * x.w() + col0, cols,
                    out.plane(n, c) + static_cast<std::size_t>(r) * cols);
  return out;
}

void paste(Tensor& dst, const Tensor& src, int row0, int col0) {
  if (src.n() != dst.n() || src.c() != dst.c() || row0 < 0 || col0 < 0 ||
      row0 + src.h() > dst.h() || col0 + src.w() > dst.w())
    fail(ErrorCode::invalid_argument, "paste: " + to_string(src.shape()) + " at (" +
                                          std::to_string(row0) + ", " + std::to_string(col0) +
                                          ") does not fit " + to_string(dst.shape()));
  for (int n = 0; n < src.n(); ++n)
    for (int c = 0; c < src.c(); ++c)
      for (int r = 0; r < src.h(); ++r)
        std::copy_n(src.plane(n, c) + static_cast<std::size_t>(r) * src.w(), src.w(),
                    dst.plane(n, c) + static_cast<std::size_t>(row0 + r) * dst.w() + col0);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool all_finite(const Tensor& x) {
  return std::all_of(x.data().begin(), x.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace imdn
