#include "fbc/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fbc/rng.hpp"

namespace fbc {

Matrix SvdResult::compose() const {
    Matrix us = u;
    for (int j = 0; j < us.cols; ++j)
        for (int i = 0; i < us.rows; ++i) us.at(i, j) *= sigma[j];
    return matmul(us, vt);
}

namespace {

constexpr double kOrthEps = 1e-13;   // pairwise cosine threshold
constexpr int kMaxSweeps = 60;
constexpr std::uint64_t kRandSvdSeed = 0x5eedbea7ull;

// Column-major working set for the Jacobi kernel.
struct ColMat {
    int rows = 0, cols = 0;
    std::vector<double> a;  // a[j*rows + i]
    double* col(int j) { return &a[static_cast<std::size_t>(j) * rows]; }
    const double* col(int j) const { return &a[static_cast<std::size_t>(j) * rows]; }
};

ColMat to_colmajor(const Matrix& m) {
    ColMat c{m.rows, m.cols, std::vector<double>(m.size())};
    for (int j = 0; j < m.cols; ++j)
        for (int i = 0; i < m.rows; ++i) c.a[static_cast<std::size_t>(j) * m.rows + i] = m.at(i, j);
    return c;
}

struct JacobiFull {
    ColMat u;                   // normalized columns, sorted
    std::vector<double> sigma;  // descending
    ColMat v;                   // right singular vectors as columns, sorted
};

// One-sided Jacobi on the columns of `a` (rows >= cols expected, works
// either way). Rotations within one round touch disjoint column pairs,
// so the round-robin schedule can run in parallel without changing any
// result bit.
JacobiFull jacobi_svd(const Matrix& m) {
    const int rows = m.rows, cols = m.cols;
    ColMat a = to_colmajor(m);
    ColMat v{cols, cols, std::vector<double>(static_cast<std::size_t>(cols) * cols, 0.0)};
    for (int j = 0; j < cols; ++j) v.col(j)[j] = 1.0;

    std::vector<double> norms2(cols, 0.0);
    for (int j = 0; j < cols; ++j) {
        const double* cj = a.col(j);
        double s = 0.0;
        for (int i = 0; i < rows; ++i) s += cj[i] * cj[i];
        norms2[j] = s;
    }

    const int padded = (cols % 2 == 0) ? cols : cols + 1;  // odd gets a bye
    const int npairs = padded / 2;
    double off = 0.0;
    bool converged = (cols < 2);

    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        off = 0.0;
        for (int round = 0; round < padded - 1; ++round) {
            double round_off = 0.0;
#pragma omp parallel for schedule(static) reduction(max : round_off) \
    if (static_cast<std::size_t>(npairs) * rows > (1u << 14))
            for (int t = 0; t < npairs; ++t) {
                int p = (round + t) % (padded - 1);
                int q = (t == 0) ? (padded - 1) : (round + padded - 1 - t) % (padded - 1);
                if (p > q) std::swap(p, q);
                if (q >= cols) continue;  // bye slot

                const double alpha = norms2[p], beta = norms2[q];
                if (alpha == 0.0 || beta == 0.0) continue;
                double* cp = a.col(p);
                double* cq = a.col(q);
                double gamma = 0.0;
                for (int i = 0; i < rows; ++i) gamma += cp[i] * cq[i];

                const double ratio = std::fabs(gamma) / std::sqrt(alpha * beta);
                round_off = std::max(round_off, ratio);
                if (ratio <= kOrthEps) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t_ = ((zeta >= 0.0) ? 1.0 : -1.0) /
                                  (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t_ * t_);
                const double sn = cs * t_;

                double na = 0.0, nb = 0.0;
                for (int i = 0; i < rows; ++i) {
                    const double ai = cp[i], aj = cq[i];
                    const double ni = cs * ai - sn * aj;
                    const double nj = sn * ai + cs * aj;
                    cp[i] = ni;
                    cq[i] = nj;
                    na += ni * ni;
                    nb += nj * nj;
                }
                norms2[p] = na;
                norms2[q] = nb;
                double* vp = v.col(p);
                double* vq = v.col(q);
                for (int i = 0; i < cols; ++i) {
                    const double vi = vp[i], vj = vq[i];
                    vp[i] = cs * vi - sn * vj;
                    vq[i] = sn * vi + cs * vj;
                }
            }
            off = std::max(off, round_off);
        }
        converged = (off <= kOrthEps);
    }
    if (!converged) {
        throw numeric_error("truncated_svd: Jacobi did not converge after " +
                            std::to_string(kMaxSweeps) +
                            " sweeps; residual off-diagonal cosine = " + std::to_string(off));
    }

    std::vector<double> sig(cols);
    for (int j = 0; j < cols; ++j) sig[j] = std::sqrt(norms2[j]);
    std::vector<int> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return sig[x] > sig[y]; });

    JacobiFull out;
    out.sigma.resize(cols);
    out.u = ColMat{rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0)};
    out.v = ColMat{cols, cols, std::vector<double>(static_cast<std::size_t>(cols) * cols, 0.0)};
    for (int j = 0; j < cols; ++j) {
        const int src = order[j];
        out.sigma[j] = sig[src];
        const double* cj = a.col(src);
        double* uj = out.u.col(j);
        if (sig[src] > 0.0) {
            const double inv = 1.0 / sig[src];
            for (int i = 0; i < rows; ++i) uj[i] = cj[i] * inv;
        }
        // zero columns are completed below
        const double* vs = v.col(src);
        std::copy(vs, vs + cols, out.v.col(j));
    }
    // Orthonormal completion for exactly-zero singular directions.
    for (int j = 0; j < cols; ++j) {
        if (out.sigma[j] > 0.0) continue;
        for (int cand = 0; cand < rows; ++cand) {
            std::vector<double> e(rows, 0.0);
            e[cand] = 1.0;
            for (int k2 = 0; k2 < cols; ++k2) {
                if (k2 == j || (out.sigma[k2] == 0.0 && k2 > j)) continue;
                const double* uk = out.u.col(k2);
                double d = 0.0;
                for (int i = 0; i < rows; ++i) d += e[i] * uk[i];
                for (int i = 0; i < rows; ++i) e[i] -= d * uk[i];
            }
            double nn = 0.0;
            for (double vv : e) nn += vv * vv;
            if (nn > 0.25) {
                const double inv = 1.0 / std::sqrt(nn);
                double* uj = out.u.col(j);
                for (int i = 0; i < rows; ++i) uj[i] = e[i] * inv;
                break;
            }
        }
    }
    return out;
}

SvdResult take_k(const JacobiFull& f, int k, bool transposed_input) {
    // For the original M (not transposed): u = U[:, :k], vt = V[:, :k]^T.
    // When the Jacobi ran on M^T, swap the roles of U and V.
    const ColMat& ucols = transposed_input ? f.v : f.u;
    const ColMat& vcols = transposed_input ? f.u : f.v;
    SvdResult r;
    r.sigma.assign(f.sigma.begin(), f.sigma.begin() + k);
    r.u = Matrix(ucols.rows, k);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < ucols.rows; ++i) r.u.at(i, j) = ucols.col(j)[i];
    r.vt = Matrix(k, vcols.rows);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < vcols.rows; ++i) r.vt.at(j, i) = vcols.col(j)[i];
    return r;
}

// Modified Gram-Schmidt, run twice; columns orthonormal on return.
void orthonormalize_columns(Matrix& y) {
    for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < y.cols; ++j) {
            for (int k2 = 0; k2 < j; ++k2) {
                double d = 0.0;
                for (int i = 0; i < y.rows; ++i) d += y.at(i, j) * y.at(i, k2);
                for (int i = 0; i < y.rows; ++i) y.at(i, j) -= d * y.at(i, k2);
            }
            double nn = 0.0;
            for (int i = 0; i < y.rows; ++i) nn += y.at(i, j) * y.at(i, j);
            if (nn < 1e-300) {  // degenerate direction; replace and redo
                Rng rg(kRandSvdSeed + 77 + static_cast<std::uint64_t>(j));
                for (int i = 0; i < y.rows; ++i) y.at(i, j) = rg.normal();
                --j;
                continue;
            }
            const double inv = 1.0 / std::sqrt(nn);
            for (int i = 0; i < y.rows; ++i) y.at(i, j) *= inv;
        }
    }
}

SvdResult randomized_svd(const Matrix& m, int k) {
    const int l = std::min(k + 8, std::min(m.rows, m.cols));
    Rng rng(kRandSvdSeed);
    Matrix omega(m.cols, l);
    for (double& v : omega.data) v = rng.normal();

    Matrix y = matmul(m, omega);
    orthonormalize_columns(y);
    const Matrix mt = transpose(m);
    for (int it = 0; it < 2; ++it) {  // power iterations
        Matrix z = matmul(mt, y);
        orthonormalize_columns(z);
        y = matmul(m, z);
        orthonormalize_columns(y);
    }
    const Matrix b = matmul(transpose(y), m);  // l x cols
    // B^T is tall (cols x l); B = V_b S U_b^T.
    const JacobiFull small = jacobi_svd(transpose(b));
    SvdResult r;
    r.sigma.assign(small.sigma.begin(), small.sigma.begin() + k);
    Matrix vb(l, k);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < l; ++i) vb.at(i, j) = small.v.col(j)[i];
    r.u = matmul(y, vb);
    r.vt = Matrix(k, m.cols);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < m.cols; ++i) r.vt.at(j, i) = small.u.col(j)[i];
    return r;
}

}  // namespace

SvdResult truncated_svd(const Matrix& m, int k) {
    const int small = std::min(m.rows, m.cols);
    if (k < 1 || k > small) {
        throw shape_error("truncated_svd: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(small) + "] for " + std::to_string(m.rows) + "x" +
                          std::to_string(m.cols));
    }
    if (small <= 512) {
        // Orient the short side as columns so Jacobi orthogonalizes few,
        // long vectors.
        const bool transposed = m.rows < m.cols;
        const JacobiFull f = jacobi_svd(transposed ? transpose(m) : m);
        return take_k(f, k, transposed);
    }
    return randomized_svd(m, k);
}

}  // namespace fbc
