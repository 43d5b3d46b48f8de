#pragma once

#include <cstddef>

#include "imdn/tensor.hpp"

namespace imdn::detail {

// Row-major C[m x n] += A[m x k] * B[k x n]. Leading dimensions equal the column counts.
void gemm_accumulate(int m, int n, int k, const double* a, const double* b, double* c);

// dst[cols x rows] = src[rows x cols]^T.
void transpose(int rows, int cols, const double* src, double* dst);

// Gradients of conv2d. Null outputs are skipped; non-null outputs are accumulated into.
void conv2d_backward(const Tensor& input, const Tensor& weight, ConvGeometry g,
                     const Tensor& grad_out, Tensor* grad_input, Tensor* grad_weight,
                     Tensor* grad_bias);

}  // namespace imdn::detail
