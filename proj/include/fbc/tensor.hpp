#pragma once

#include <cstddef>
#include <vector>

#include "fbc/errors.hpp"

namespace fbc {

/// Dense 4-D tensor of doubles, row-major (n, c, h, w).
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_);

    std::size_t size() const { return data.size(); }

    std::size_t idx(int i, int j, int y, int x) const {
        return ((static_cast<std::size_t>(i) * c + j) * h + y) * w + x;
    }
    double& at(int i, int j, int y, int x) { return data[idx(i, j, y, x)]; }
    double at(int i, int j, int y, int x) const { return data[idx(i, j, y, x)]; }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    bool all_finite() const;
};

/// Dense matrix of doubles, row-major.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c);

    std::size_t size() const { return data.size(); }
    double& at(int r, int c_) { return data[static_cast<std::size_t>(r) * cols + c_]; }
    double at(int r, int c_) const { return data[static_cast<std::size_t>(r) * cols + c_]; }

    bool all_finite() const;
};

/// a * b. Parallel over rows of the result; the per-element summation
/// order is fixed, so results do not depend on the thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix identity(int n);

double frob_norm(const Matrix& m);
double frob_norm(const Tensor4& t);
double frob_diff(const Matrix& a, const Matrix& b);
double frob_diff(const Tensor4& a, const Tensor4& b);
double max_abs(const Tensor4& t);
double max_abs_diff(const Tensor4& a, const Tensor4& b);

}  // namespace fbc
