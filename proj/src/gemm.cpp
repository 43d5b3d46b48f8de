#include "imdn/kernels.hpp"

#include <algorithm>

namespace imdn::detail {

namespace {

constexpr int kBlockN = 256;
constexpr int kBlockK = 128;

}  // namespace

void gemm_accumulate(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int j0 = 0; j0 < n; j0 += kBlockN) {
    const int j1 = std::min(n, j0 + kBlockN);
    const int jn = j1 - j0;
    for (int p0 = 0; p0 < k; p0 += kBlockK) {
      const int p1 = std::min(k, p0 + kBlockK);
      int i = 0;
      // Four rows of C share each streamed row of B.
      for (; i + 4 <= m; i += 4) {
        double* __restrict c0 = c + static_cast<std::size_t>(i) * n + j0;
        double* __restrict c1 = c0 + n;
        double* __restrict c2 = c1 + n;
        double* __restrict c3 = c2 + n;
        for (int p = p0; p < p1; ++p) {
          const double a0 = a[static_cast<std::size_t>(i) * k + p];
          const double a1 = a[static_cast<std::size_t>(i + 1) * k + p];
          const double a2 = a[static_cast<std::size_t>(i + 2) * k + p];
          const double a3 = a[static_cast<std::size_t>(i + 3) * k + p];
          const double* __restrict brow = b + static_cast<std::size_t>(p) * n + j0;
          for (int j = 0; j < jn; ++j) {
            const double bv = brow[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
          }
        }
      }
      for (; i < m; ++i) {
        double* __restrict crow = c + static_cast<std::size_t>(i) * n + j0;
        for (int p = p0; p < p1; ++p) {
          const double av = a[static_cast<std::size_t>(i) * k + p];
          const double* __restrict brow = b + static_cast<std::size_t>(p) * n + j0;
          for (int j = 0; j < jn; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

void transpose(int rows, int cols, const double* src, double* dst) {
  constexpr int kTile = 32;
  for (int r0 = 0; r0 < rows; r0 += kTile) {
    const int r1 = std::min(rows, r0 + kTile);
    for (int c0 = 0; c0 < cols; c0 += kTile) {
      const int c1 = std::min(cols, c0 + kTile);
      for (int r = r0; r < r1; ++r)
        for (int cc = c0; cc < c1; ++cc)
          dst[static_cast<std::size_t>(cc) * rows + r] = src[static_cast<std::size_t>(r) * cols + cc];
    }
  }
}

}  // namespace imdn::detail
