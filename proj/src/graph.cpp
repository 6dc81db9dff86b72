#include "fbc/graph.hpp"

#include <algorithm>
#include <cmath>

namespace fbc {

namespace {

Shape3 layer_out_shape(const ModelGraph& g, const Layer& layer, const Shape3& in) {
    const std::string& name = layer.name;
    return std::visit(
        [&](const auto& op) -> Shape3 {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ConvLayer>) {
                if (op.shape.c != in.c)
                    throw shape_error("layer '" + name + "': expects " +
                                      std::to_string(op.shape.c) + " input channels, got " +
                                      std::to_string(in.c));
                const int oh = conv_out_dim(in.h, op.shape.h, op.stride, op.pad);
                const int ow = conv_out_dim(in.w, op.shape.w, op.stride, op.pad);
                if (oh < 1 || ow < 1)
                    throw shape_error("layer '" + name + "': output dims < 1");
                return Shape3{op.shape.n, oh, ow};
            } else if constexpr (std::is_same_v<T, DecomposedConvLayer>) {
                if (op.shape.c != in.c)
                    throw shape_error("layer '" + name + "': expects " +
                                      std::to_string(op.shape.c) + " input channels, got " +
                                      std::to_string(in.c));
                auto it = g.bases.find(op.basis_id);
                if (it == g.bases.end())
                    throw shape_error("layer '" + name + "': unknown basis '" + op.basis_id + "'");
                const BasisSet& b = it->second;
                if (b.p * op.s != op.shape.c || b.h != op.shape.h || b.w != op.shape.w)
                    throw shape_error("layer '" + name + "': basis '" + op.basis_id +
                                      "' does not match layer shape");
                if (op.slice < 1 || op.slice > b.m())
                    throw shape_error("layer '" + name + "': slice width " +
                                      std::to_string(op.slice) + " outside basis of " +
                                      std::to_string(b.m()));
                if (op.coeffs.mat.rows != op.slice || op.coeffs.n != op.shape.n ||
                    op.coeffs.s != op.s)
                    throw shape_error("layer '" + name + "': coefficient dims do not match");
                if (op.reference && !(op.reference->n == op.shape.n &&
                                      op.reference->c == op.shape.c &&
                                      op.reference->h == op.shape.h &&
                                      op.reference->w == op.shape.w))
                    throw shape_error("layer '" + name + "': reference weight shape mismatch");
                const int oh = conv_out_dim(in.h, op.shape.h, op.stride, op.pad);
                const int ow = conv_out_dim(in.w, op.shape.w, op.stride, op.pad);
                if (oh < 1 || ow < 1)
                    throw shape_error("layer '" + name + "': output dims < 1");
                return Shape3{op.shape.n, oh, ow};
            } else if constexpr (std::is_same_v<T, ReluLayer>) {
                return in;
            } else if constexpr (std::is_same_v<T, GlobalAvgPoolLayer>) {
                return Shape3{in.c, 1, 1};
            } else if constexpr (std::is_same_v<T, DenseLayer>) {
                if (op.in != in.c * in.h * in.w)
                    throw shape_error("layer '" + name + "': dense expects " +
                                      std::to_string(op.in) + " inputs, got " +
                                      std::to_string(in.c * in.h * in.w));
                if (op.weight.rows != op.out || op.weight.cols != op.in)
                    throw shape_error("layer '" + name + "': dense weight dims mismatch");
                return Shape3{op.out, 1, 1};
            } else {
                static_assert(std::is_same_v<T, UpsampleNearestLayer>);
                if (op.factor < 1)
                    throw shape_error("layer '" + name + "': upsample factor must be >= 1");
                return Shape3{in.c, in.h * op.factor, in.w * op.factor};
            }
        },
        layer.op);
}

}  // namespace

std::vector<Shape3> ModelGraph::infer_shapes() const {
    if (input.c < 1 || input.h < 1 || input.w < 1)
        throw shape_error("graph input shape must be positive");
    std::vector<Shape3> out;
    Shape3 cur = input;
    for (const Layer& l : layers) {
        cur = layer_out_shape(*this, l, cur);
        out.push_back(cur);
    }
    return out;
}

DecomposedLayer ModelGraph::materialize(const DecomposedConvLayer& layer) const {
    auto it = bases.find(layer.basis_id);
    if (it == bases.end())
        throw shape_error("unknown basis '" + layer.basis_id + "'");
    DecomposedLayer dl;
    dl.basis = (layer.slice == it->second.m()) ? it->second : slice_basis(it->second, layer.slice);
    dl.coeffs = layer.coeffs;
    dl.s = layer.s;
    dl.stride = layer.stride;
    dl.pad = layer.pad;
    dl.bias = layer.bias;
    return dl;
}

Tensor4 apply_layer(const ModelGraph& g, const Layer& layer, const Tensor4& x) {
    return std::visit(
        [&](const auto& op) -> Tensor4 {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ConvLayer>) {
                return conv2d(x, op.weight, op.stride, op.pad, op.bias);
            } else if constexpr (std::is_same_v<T, DecomposedConvLayer>) {
                return forward(x, g.materialize(op));
            } else if constexpr (std::is_same_v<T, ReluLayer>) {
                Tensor4 y = x;
                for (double& v : y.data) v = std::max(0.0, v);
                return y;
            } else if constexpr (std::is_same_v<T, GlobalAvgPoolLayer>) {
                Tensor4 y(x.n, x.c, 1, 1);
                const double inv = 1.0 / (static_cast<double>(x.h) * x.w);
                for (int b = 0; b < x.n; ++b)
                    for (int ch = 0; ch < x.c; ++ch) {
                        double s = 0.0;
                        const double* plane = &x.data[x.idx(b, ch, 0, 0)];
                        for (int i = 0; i < x.h * x.w; ++i) s += plane[i];
                        y.at(b, ch, 0, 0) = s * inv;
                    }
                return y;
            } else if constexpr (std::is_same_v<T, DenseLayer>) {
                Tensor4 y(x.n, op.out, 1, 1);
                for (int b = 0; b < x.n; ++b)
                    for (int o = 0; o < op.out; ++o) {
                        double s = op.bias.empty() ? 0.0 : op.bias[o];
                        const double* xrow = &x.data[x.idx(b, 0, 0, 0)];
                        for (int i = 0; i < op.in; ++i) s += op.weight.at(o, i) * xrow[i];
                        y.at(b, o, 0, 0) = s;
                    }
                return y;
            } else {
                static_assert(std::is_same_v<T, UpsampleNearestLayer>);
                Tensor4 y(x.n, x.c, x.h * op.factor, x.w * op.factor);
                for (int b = 0; b < x.n; ++b)
                    for (int ch = 0; ch < x.c; ++ch)
                        for (int yy = 0; yy < y.h; ++yy)
                            for (int xx = 0; xx < y.w; ++xx)
                                y.at(b, ch, yy, xx) = x.at(b, ch, yy / op.factor, xx / op.factor);
                return y;
            }
        },
        layer.op);
}

Tensor4 ModelGraph::forward(const Tensor4& x) const {
    Tensor4 cur = x;
    for (const Layer& l : layers) {
        cur = apply_layer(*this, l, cur);
        if (!cur.all_finite())
            throw numeric_error("layer '" + l.name + "' produced non-finite values");
    }
    return cur;
}

Layer* ModelGraph::find(const std::string& name) {
    for (Layer& l : layers)
        if (l.name == name) return &l;
    return nullptr;
}

const Layer* ModelGraph::find(const std::string& name) const {
    for (const Layer& l : layers)
        if (l.name == name) return &l;
    return nullptr;
}

std::uint64_t ModelGraph::compressed_param_count() const {
    std::uint64_t total = 0;
    for (const auto& [id, b] : bases) total += b.mat.size();
    for (const Layer& l : layers)
        if (const auto* d = std::get_if<DecomposedConvLayer>(&l.op)) total += d->coeffs.mat.size();
    return total;
}

std::uint64_t ModelGraph::original_param_count() const {
    std::uint64_t total = 0;
    for (const Layer& l : layers) {
        if (const auto* cv = std::get_if<ConvLayer>(&l.op)) {
            total += static_cast<std::uint64_t>(cv->shape.n) * cv->shape.c * cv->shape.w *
                     cv->shape.h;
        } else if (const auto* d = std::get_if<DecomposedConvLayer>(&l.op)) {
            total += static_cast<std::uint64_t>(d->shape.n) * d->shape.c * d->shape.w *
                     d->shape.h;
        }
    }
    return total;
}

}  // namespace fbc
