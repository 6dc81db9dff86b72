#include "fbc/conv.hpp"

#include <cstring>
#include <string>

namespace fbc {

int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

Matrix im2col(const Tensor4& x, int sample, int kh, int kw, int stride, int pad) {
    const int oh = conv_out_dim(x.h, kh, stride, pad);
    const int ow = conv_out_dim(x.w, kw, stride, pad);
    Matrix cols(x.c * kh * kw, oh * ow);
    const int nrows = cols.rows;
#pragma omp parallel for schedule(static) if (cols.size() > (1u << 16))
    for (int r = 0; r < nrows; ++r) {
        const int ch = r / (kh * kw);
        const int ky = (r / kw) % kh;
        const int kx = r % kw;
        double* row = &cols.data[static_cast<std::size_t>(r) * cols.cols];
        for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= x.h) {
                for (int ox = 0; ox < ow; ++ox) row[oy * ow + ox] = 0.0;
                continue;
            }
            for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride + kx - pad;
                row[oy * ow + ox] = (ix < 0 || ix >= x.w) ? 0.0 : x.at(sample, ch, iy, ix);
            }
        }
    }
    return cols;
}

void col2im(const Matrix& cols, int kh, int kw, int stride, int pad,
            Tensor4& dx, int sample) {
    const int oh = conv_out_dim(dx.h, kh, stride, pad);
    const int ow = conv_out_dim(dx.w, kw, stride, pad);
    if (cols.rows != dx.c * kh * kw || cols.cols != oh * ow)
        throw shape_error("col2im: patch matrix does not match target dims");
    // Rows of one channel only touch that channel's plane, so channels can
    // scatter concurrently; within a channel the order is fixed.
    const int chans = dx.c;
#pragma omp parallel for schedule(static) if (cols.size() > (1u << 16))
    for (int ch = 0; ch < chans; ++ch) {
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                const int r = (ch * kh + ky) * kw + kx;
                const double* row = &cols.data[static_cast<std::size_t>(r) * cols.cols];
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= dx.h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= dx.w) continue;
                        dx.at(sample, ch, iy, ix) += row[oy * ow + ox];
                    }
                }
            }
    }
}

namespace {

// (n) x (c*kh*kw) view of a weight tensor; the row-major filter layout is
// already channel-major, then h, then w.
Matrix weight_matrix(const Tensor4& weight) {
    Matrix wm(weight.n, weight.c * weight.h * weight.w);
    wm.data = weight.data;
    return wm;
}

void check_conv_args(const Tensor4& x, const Tensor4& weight, int stride, int pad) {
    if (weight.c != x.c) {
        throw shape_error("conv2d: weight expects " + std::to_string(weight.c) +
                          " input channels, input has " + std::to_string(x.c));
    }
    if (stride < 1) throw shape_error("conv2d: stride must be >= 1");
    if (pad < 0) throw shape_error("conv2d: pad must be >= 0");
    if (conv_out_dim(x.h, weight.h, stride, pad) < 1 ||
        conv_out_dim(x.w, weight.w, stride, pad) < 1) {
        throw shape_error("conv2d: output dims < 1 for input " + std::to_string(x.h) + "x" +
                          std::to_string(x.w) + ", kernel " + std::to_string(weight.h) + "x" +
                          std::to_string(weight.w) + ", stride " + std::to_string(stride) +
                          ", pad " + std::to_string(pad));
    }
}

}  // namespace

Tensor4 conv2d(const Tensor4& x, const Tensor4& weight, int stride, int pad,
               std::span<const double> bias) {
    check_conv_args(x, weight, stride, pad);
    if (!bias.empty() && static_cast<int>(bias.size()) != weight.n)
        throw shape_error("conv2d: bias length != output channels");

    const int oh = conv_out_dim(x.h, weight.h, stride, pad);
    const int ow = conv_out_dim(x.w, weight.w, stride, pad);
    const Matrix wm = weight_matrix(weight);
    Tensor4 out(x.n, weight.n, oh, ow);

    for (int b = 0; b < x.n; ++b) {
        const Matrix cols = im2col(x, b, weight.h, weight.w, stride, pad);
        const Matrix y = matmul(wm, cols);  // n x (oh*ow)
        std::memcpy(&out.data[out.idx(b, 0, 0, 0)], y.data.data(),
                    y.size() * sizeof(double));
    }
    if (!bias.empty()) {
        for (int b = 0; b < x.n; ++b)
            for (int f = 0; f < weight.n; ++f) {
                double* plane = &out.data[out.idx(b, f, 0, 0)];
                for (int i = 0; i < oh * ow; ++i) plane[i] += bias[f];
            }
    }
    return out;
}

Tensor4 conv2d_grad_input(const Tensor4& weight, const Tensor4& dy,
                          int in_h, int in_w, int stride, int pad) {
    if (dy.c != weight.n) throw shape_error("conv2d_grad_input: dy channels != filters");
    const int oh = dy.h, ow = dy.w;
    const Matrix wt = transpose(weight_matrix(weight));  // (c*kh*kw) x n
    Tensor4 dx(dy.n, weight.c, in_h, in_w);
    for (int b = 0; b < dy.n; ++b) {
        Matrix dym(weight.n, oh * ow);
        std::memcpy(dym.data.data(), &dy.data[dy.idx(b, 0, 0, 0)],
                    dym.size() * sizeof(double));
        const Matrix dcols = matmul(wt, dym);
        col2im(dcols, weight.h, weight.w, stride, pad, dx, b);
    }
    return dx;
}

Tensor4 conv2d_grad_weight(const Tensor4& x, const Tensor4& dy,
                           int kh, int kw, int stride, int pad) {
    const int oh = dy.h, ow = dy.w;
    if (oh != conv_out_dim(x.h, kh, stride, pad) || ow != conv_out_dim(x.w, kw, stride, pad))
        throw shape_error("conv2d_grad_weight: dy dims inconsistent with input/kernel");
    Matrix acc(dy.c, x.c * kh * kw);
    for (int b = 0; b < x.n; ++b) {
        Matrix dym(dy.c, oh * ow);
        std::memcpy(dym.data.data(), &dy.data[dy.idx(b, 0, 0, 0)],
                    dym.size() * sizeof(double));
        const Matrix cols_t = transpose(im2col(x, b, kh, kw, stride, pad));
        const Matrix g = matmul(dym, cols_t);
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
    }
    Tensor4 dw(dy.c, x.c, kh, kw);
    dw.data = acc.data;
    return dw;
}

Tensor4 channel_slice(const Tensor4& x, int from, int count) {
    if (from < 0 || count < 1 || from + count > x.c)
        throw shape_error("channel_slice: range [" + std::to_string(from) + ", " +
                          std::to_string(from + count) + ") outside " + std::to_string(x.c) +
                          " channels");
    Tensor4 out(x.n, count, x.h, x.w);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int b = 0; b < x.n; ++b)
        std::memcpy(&out.data[out.idx(b, 0, 0, 0)], &x.data[x.idx(b, from, 0, 0)],
                    plane * count * sizeof(double));
    return out;
}

Tensor4 channel_concat(const std::vector<Tensor4>& parts) {
    if (parts.empty()) throw shape_error("channel_concat: no parts");
    int total_c = 0;
    for (const auto& p : parts) {
        if (p.n != parts[0].n || p.h != parts[0].h || p.w != parts[0].w)
            throw shape_error("channel_concat: parts disagree on batch or spatial dims");
        total_c += p.c;
    }
    Tensor4 out(parts[0].n, total_c, parts[0].h, parts[0].w);
    const std::size_t plane = static_cast<std::size_t>(out.h) * out.w;
    for (int b = 0; b < out.n; ++b) {
        int at_c = 0;
        for (const auto& p : parts) {
            std::memcpy(&out.data[out.idx(b, at_c, 0, 0)], &p.data[p.idx(b, 0, 0, 0)],
                        plane * p.c * sizeof(double));
            at_c += p.c;
        }
    }
    return out;
}

}  // namespace fbc
