#pragma once

#include <vector>

#include "fbc/tensor.hpp"

namespace fbc {

/// Rank-k factorization m ~= u * diag(sigma) * vt.
struct SvdResult {
    Matrix u;                    // rows x k, orthonormal columns
    std::vector<double> sigma;   // length k, non-increasing, >= 0
    Matrix vt;                   // k x cols, orthonormal rows

    Matrix compose() const;      // u * diag(sigma) * vt
};

/// Best rank-k Frobenius approximation of m (Eckart-Young).
///
/// Narrow matrices (cols <= 512 after orienting the short side as
/// columns) go through one-sided Jacobi; wider ones through randomized
/// subspace iteration with a fixed seed, 2 power iterations and
/// oversampling 8. Both paths are deterministic for identical inputs,
/// independent of the thread count.
///
/// Throws shape_error when k is outside [1, min(rows, cols)] and
/// numeric_error if Jacobi fails to converge within the sweep cap.
SvdResult truncated_svd(const Matrix& m, int k);

}  // namespace fbc
