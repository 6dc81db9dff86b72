#include "fbc/decompose.hpp"

#include <algorithm>
#include <cmath>

#include "fbc/svd.hpp"

namespace fbc {

Tensor4 BasisSet::to_tensor() const {
    Tensor4 t(m(), p, h, w);
    for (int j = 0; j < m(); ++j)
        for (int ch = 0; ch < p; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    t.at(j, ch, y, x) = mat.at((ch * h + y) * w + x, j);
    return t;
}

SplitMatrix split_and_flatten(const Tensor4& weight, int s) {
    if (s < 1 || weight.c % s != 0) {
        throw shape_error("split_and_flatten: s = " + std::to_string(s) +
                          " does not divide c = " + std::to_string(weight.c));
    }
    const int p = weight.c / s;
    const int rows = p * weight.h * weight.w;
    SplitMatrix sm;
    sm.origin = LayerShape{weight.n, weight.c, weight.w, weight.h};
    sm.s = s;
    sm.mat = Matrix(rows, weight.n * s);
    // Column g*n + i is the contiguous slab W[i, g*p : (g+1)*p, :, :].
    for (int g = 0; g < s; ++g)
        for (int i = 0; i < weight.n; ++i) {
            const double* src = &weight.data[weight.idx(i, g * p, 0, 0)];
            const int col = g * weight.n + i;
            for (int r = 0; r < rows; ++r) sm.mat.at(r, col) = src[r];
        }
    return sm;
}

Tensor4 unflatten(const SplitMatrix& sm) {
    const LayerShape& o = sm.origin;
    const int p = sm.p();
    const int rows = p * o.h * o.w;
    if (sm.mat.rows != rows || sm.mat.cols != o.n * sm.s)
        throw shape_error("unflatten: matrix dims inconsistent with origin shape");
    Tensor4 w(o.n, o.c, o.h, o.w);
    for (int g = 0; g < sm.s; ++g)
        for (int i = 0; i < o.n; ++i) {
            double* dst = &w.data[w.idx(i, g * p, 0, 0)];
            const int col = g * o.n + i;
            for (int r = 0; r < rows; ++r) dst[r] = sm.mat.at(r, col);
        }
    return w;
}

namespace {

bool is_all_zero(const Matrix& m) {
    return std::all_of(m.data.begin(), m.data.end(), [](double v) { return v == 0.0; });
}

// B = U*Sigma, A = V^T.
void factor_from_svd(const SvdResult& svd, Matrix& b, Matrix& a) {
    b = svd.u;
    for (int j = 0; j < b.cols; ++j)
        for (int i = 0; i < b.rows; ++i) b.at(i, j) *= svd.sigma[j];
    a = svd.vt;
}

}  // namespace

FitResult fit(const SplitMatrix& sm, int m) {
    const int max_m = std::min(sm.mat.rows, sm.mat.cols);
    if (m < 1 || m > max_m) {
        throw shape_error("fit: m = " + std::to_string(m) + " outside [1, " +
                          std::to_string(max_m) + "]");
    }
    FitResult out;
    out.basis.p = sm.p();
    out.basis.h = sm.origin.h;
    out.basis.w = sm.origin.w;
    out.coeffs.n = sm.origin.n;
    out.coeffs.s = sm.s;
    if (is_all_zero(sm.mat)) {
        // SVD of an all-zero layer has no meaningful directions; hand back
        // zeros and flag it.
        out.basis.mat = Matrix(sm.mat.rows, m);
        out.coeffs.mat = Matrix(m, sm.mat.cols);
        out.residual = 0.0;
        out.degenerate = true;
        return out;
    }
    const SvdResult svd = truncated_svd(sm.mat, m);
    factor_from_svd(svd, out.basis.mat, out.coeffs.mat);
    out.residual = frob_diff(sm.mat, matmul(out.basis.mat, out.coeffs.mat));
    out.degenerate = std::any_of(svd.sigma.begin(), svd.sigma.end(),
                                 [](double s) { return s == 0.0; });
    return out;
}

SharedFitResult fit_shared(const std::vector<SplitMatrix>& group, int m) {
    if (group.empty()) throw shape_error("fit_shared: empty group");
    const SplitMatrix& head = group.front();
    int total_cols = 0;
    for (const SplitMatrix& sm : group) {
        if (sm.p() != head.p() || sm.origin.h != head.origin.h || sm.origin.w != head.origin.w) {
            throw shape_error("fit_shared: member split shape (" + std::to_string(sm.p()) + ", " +
                              std::to_string(sm.origin.h) + ", " + std::to_string(sm.origin.w) +
                              ") differs from (" + std::to_string(head.p()) + ", " +
                              std::to_string(head.origin.h) + ", " +
                              std::to_string(head.origin.w) + ")");
        }
        total_cols += sm.mat.cols;
    }
    Matrix cat(head.mat.rows, total_cols);
    int at = 0;
    for (const SplitMatrix& sm : group) {
        for (int r = 0; r < cat.rows; ++r)
            for (int c = 0; c < sm.mat.cols; ++c) cat.at(r, at + c) = sm.mat.at(r, c);
        at += sm.mat.cols;
    }

    SplitMatrix joined;  // the concatenation, viewed as one single-split layer
    joined.mat = std::move(cat);
    joined.origin = LayerShape{total_cols, head.p(), head.origin.w, head.origin.h};
    joined.s = 1;
    FitResult f = fit(joined, m);

    SharedFitResult out;
    out.basis = std::move(f.basis);
    out.residual = f.residual;
    out.degenerate = f.degenerate;
    at = 0;
    for (const SplitMatrix& sm : group) {
        CoefficientSet cs;
        cs.n = sm.origin.n;
        cs.s = sm.s;
        cs.mat = Matrix(m, sm.mat.cols);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < sm.mat.cols; ++c) cs.mat.at(r, c) = f.coeffs.mat.at(r, at + c);
        at += sm.mat.cols;
        out.coeffs.push_back(std::move(cs));
    }
    return out;
}

BasisSet slice_basis(const BasisSet& shared, int k) {
    if (k < 1 || k > shared.m()) {
        throw shape_error("slice_basis: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(shared.m()) + "]");
    }
    BasisSet out;
    out.p = shared.p;
    out.h = shared.h;
    out.w = shared.w;
    out.id = shared.id;
    out.mat = Matrix(shared.mat.rows, k);
    for (int r = 0; r < shared.mat.rows; ++r)
        for (int j = 0; j < k; ++j) out.mat.at(r, j) = shared.mat.at(r, j);
    return out;
}

Tensor4 reconstruct(const BasisSet& b, const CoefficientSet& a,
                    const LayerShape& shape, int s) {
    shape.validate();
    if (s < 1 || shape.c % s != 0)
        throw shape_error("reconstruct: s does not divide c");
    if (b.m() != a.mat.rows)
        throw shape_error("reconstruct: basis count " + std::to_string(b.m()) +
                          " != coefficient rows " + std::to_string(a.mat.rows));
    if (a.mat.cols != shape.n * s || a.n != shape.n || a.s != s)
        throw shape_error("reconstruct: coefficient layout does not match (n, s)");
    if (b.p != shape.c / s || b.h != shape.h || b.w != shape.w)
        throw shape_error("reconstruct: basis filter shape does not match layer");
    SplitMatrix sm;
    sm.mat = matmul(b.mat, a.mat);
    sm.origin = shape;
    sm.s = s;
    return unflatten(sm);
}

}  // namespace fbc
