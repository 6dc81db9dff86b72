#pragma once

#include "fbc/tensor.hpp"

namespace fbc::ref {

// Plain serial loop kernels. These are the oracles the parallel fast
// paths are checked against, and the baseline for the benchmark tool.

/// Six-nested-loop 2-D convolution (cross-correlation, zero padding).
Tensor4 conv2d(const Tensor4& x, const Tensor4& weight, int stride, int pad);

/// Triple-loop matrix product.
Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace fbc::ref
