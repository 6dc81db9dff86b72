#pragma once

#include <span>
#include <vector>

#include "fbc/tensor.hpp"

namespace fbc {

/// Output extent along one axis: floor((in + 2*pad - k) / stride) + 1.
int conv_out_dim(int in, int k, int stride, int pad);

/// Patch matrix for one sample: (c*kh*kw) x (oh*ow), row (ch*kh + ky)*kw + kx.
Matrix im2col(const Tensor4& x, int sample, int kh, int kw, int stride, int pad);

/// Scatter-add inverse of im2col; accumulates into sample `sample` of dx.
void col2im(const Matrix& cols, int kh, int kw, int stride, int pad,
            Tensor4& dx, int sample);

/// 2-D convolution in the cross-correlation convention (no kernel flip),
/// zero padding. Fast path is im2col + matmul; `bias`, when non-empty,
/// has one entry per output channel.
Tensor4 conv2d(const Tensor4& x, const Tensor4& weight, int stride, int pad,
               std::span<const double> bias = {});

/// Gradient of conv2d w.r.t. its input.
Tensor4 conv2d_grad_input(const Tensor4& weight, const Tensor4& dy,
                          int in_h, int in_w, int stride, int pad);

/// Gradient of conv2d w.r.t. its weight (summed over the batch).
Tensor4 conv2d_grad_weight(const Tensor4& x, const Tensor4& dy,
                           int kh, int kw, int stride, int pad);

/// Channels [from, from+count) as a new tensor.
Tensor4 channel_slice(const Tensor4& x, int from, int count);

/// Concatenation along the channel dimension, in the given order.
Tensor4 channel_concat(const std::vector<Tensor4>& parts);

}  // namespace fbc
