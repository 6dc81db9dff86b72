#pragma once

#include <string>
#include <vector>

#include "fbc/planner.hpp"
#include "fbc/tensor.hpp"

namespace fbc {

/// A layer's weights flattened into a (p*w*h) x (n*s) matrix. Column
/// g*n + i holds split g of filter i, vectorized channel-major, then h,
/// then w. The rearrangement is a pure permutation and inverts exactly.
struct SplitMatrix {
    Matrix mat;
    LayerShape origin;
    int s = 1;

    int p() const { return origin.c / s; }
};

/// m basis filters as the columns of a (p*h*w) x m matrix, viewable as a
/// (m, p, h, w) tensor. `id` names the set when layers share it.
struct BasisSet {
    Matrix mat;
    int p = 0, h = 0, w = 0;
    std::string id;

    int m() const { return mat.cols; }
    Tensor4 to_tensor() const;
};

/// Linear-combination weights, m x (n*s); column g*n + i weights the
/// reconstruction of split g of filter i (split-major, fixed layout).
struct CoefficientSet {
    Matrix mat;
    int n = 0, s = 1;
};

struct FitResult {
    BasisSet basis;
    CoefficientSet coeffs;
    double residual = 0.0;
    bool degenerate = false;  // a fitted direction had singular value zero
};

struct SharedFitResult {
    BasisSet basis;
    std::vector<CoefficientSet> coeffs;  // one per group member, in order
    double residual = 0.0;
    bool degenerate = false;
};

SplitMatrix split_and_flatten(const Tensor4& weight, int s);

/// Exact inverse of split_and_flatten (bit-exact).
Tensor4 unflatten(const SplitMatrix& sm);

/// Rank-m fit via truncated SVD; the scale lives in the basis
/// (B = U*Sigma, A = V^T), so coefficient rows come out orthonormal.
/// residual = ||M - B*A||_F, minimal over all rank-m factorizations.
FitResult fit(const SplitMatrix& sm, int m);

/// One rank-m basis for the column-wise concatenation of the group;
/// per-member coefficient blocks are sliced back out.
SharedFitResult fit_shared(const std::vector<SplitMatrix>& group, int m);

/// First k basis filters, order preserved.
BasisSet slice_basis(const BasisSet& shared, int k);

/// unflatten(B*A) back to a full (n, c, h, w) weight tensor.
Tensor4 reconstruct(const BasisSet& b, const CoefficientSet& a,
                    const LayerShape& shape, int s);

}  // namespace fbc
