#include "fbc/decomposed_conv.hpp"

#include <string>

namespace fbc {

namespace {

void check_layer(const Tensor4& x, const DecomposedLayer& layer) {
    const int expect_c = layer.basis.p * layer.s;
    if (x.c != expect_c) {
        throw shape_error("decomposed forward: input has " + std::to_string(x.c) +
                          " channels, layer expects s*p = " + std::to_string(layer.s) + "*" +
                          std::to_string(layer.basis.p) + " = " + std::to_string(expect_c));
    }
    if (layer.coeffs.mat.rows != layer.basis.m())
        throw shape_error("decomposed forward: coefficient rows != basis count");
    if (layer.coeffs.s != layer.s ||
        layer.coeffs.mat.cols != layer.coeffs.n * layer.coeffs.s)
        throw shape_error("decomposed forward: coefficient layout does not match (n, s)");
}

}  // namespace

Tensor4 combine_weight(const DecomposedLayer& layer) {
    const int n = layer.coeffs.n, m = layer.basis.m(), s = layer.s;
    Tensor4 w(n, s * m, 1, 1);
    for (int i = 0; i < n; ++i)
        for (int g = 0; g < s; ++g)
            for (int j = 0; j < m; ++j)
                w.at(i, g * m + j, 0, 0) = layer.coeffs.mat.at(j, g * n + i);
    return w;
}

Tensor4 forward(const Tensor4& x, const DecomposedLayer& layer) {
    check_layer(x, layer);
    const Tensor4 basis_w = layer.basis.to_tensor();
    const int p = layer.basis.p;
    std::vector<Tensor4> stage;
    stage.reserve(layer.s);
    for (int g = 0; g < layer.s; ++g) {
        // every split goes through the same basis weights
        stage.push_back(conv2d(channel_slice(x, g * p, p), basis_w, layer.stride, layer.pad));
    }
    const Tensor4 z = channel_concat(stage);
    Tensor4 out = conv2d(z, combine_weight(layer), 1, 0, layer.bias);
    if (!out.all_finite())
        throw numeric_error("decomposed forward: non-finite values in output");
    return out;
}

Tensor4 forward_via_reconstruction(const Tensor4& x, const DecomposedLayer& layer) {
    check_layer(x, layer);
    const Tensor4 w = reconstruct(layer.basis, layer.coeffs, layer.shape(), layer.s);
    return conv2d(x, w, layer.stride, layer.pad, layer.bias);
}

std::uint64_t macs(const DecomposedLayer& layer, int out_h, int out_w) {
    return count_flops(layer.shape(), layer.basis.m(), layer.s, out_h, out_w).flops_compressed;
}

}  // namespace fbc
