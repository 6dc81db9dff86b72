#include "fbc/reference.hpp"

namespace fbc::ref {

Tensor4 conv2d(const Tensor4& x, const Tensor4& weight, int stride, int pad) {
    if (weight.c != x.c) throw shape_error("ref::conv2d: channel mismatch");
    const int oh = (x.h + 2 * pad - weight.h) / stride + 1;
    const int ow = (x.w + 2 * pad - weight.w) / stride + 1;
    Tensor4 out(x.n, weight.n, oh, ow);
    for (int b = 0; b < x.n; ++b)
        for (int f = 0; f < weight.n; ++f)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int ch = 0; ch < x.c; ++ch)
                        for (int ky = 0; ky < weight.h; ++ky)
                            for (int kx = 0; kx < weight.w; ++kx) {
                                int iy = oy * stride + ky - pad;
                                int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += x.at(b, ch, iy, ix) * weight.at(f, ch, ky, kx);
                            }
                    out.at(b, f, oy, ox) = acc;
                }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw shape_error("ref::matmul: inner dims differ");
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
            c.at(i, j) = acc;
        }
    return c;
}

}  // namespace fbc::ref
