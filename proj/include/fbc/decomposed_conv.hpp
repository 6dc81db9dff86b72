#pragma once

#include <cstdint>
#include <vector>

#include "fbc/conv.hpp"
#include "fbc/decompose.hpp"

namespace fbc {

/// A convolution in basis form: the input splits into s channel groups of
/// depth p, every group is convolved with the same basis filters, the s*m
/// feature maps are concatenated split-major (g outer, j inner), and a
/// 1x1 convolution applies the coefficients. Bias, when present, sits on
/// the 1x1 combine only.
struct DecomposedLayer {
    BasisSet basis;
    CoefficientSet coeffs;
    int s = 1;
    int stride = 1;
    int pad = 0;
    std::vector<double> bias;

    LayerShape shape() const {
        return LayerShape{coeffs.n, basis.p * s, basis.w, basis.h};
    }
};

/// The decomposed forward pass. Equals conv2d with the reconstructed
/// weights up to floating-point summation order.
Tensor4 forward(const Tensor4& x, const DecomposedLayer& layer);

/// Reference path: reconstruct the full weights, then conv2d. Exists as
/// the equivalence oracle for `forward`.
Tensor4 forward_via_reconstruction(const Tensor4& x, const DecomposedLayer& layer);

/// 1x1 combine weights, (n, s*m, 1, 1); entry (i, g*m+j) is coeff (j, g*n+i).
Tensor4 combine_weight(const DecomposedLayer& layer);

/// Per-sample multiply-accumulates of `forward` at the given output size.
std::uint64_t macs(const DecomposedLayer& layer, int out_h, int out_w);

}  // namespace fbc
