#include "fbc/tensor.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "fbc/mac_counter.hpp"

namespace fbc {

Tensor4::Tensor4(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
    if (n < 1 || c < 1 || h < 1 || w < 1) {
        throw shape_error("Tensor4 dims must all be >= 1, got (" + std::to_string(n_) + ", " +
                          std::to_string(c_) + ", " + std::to_string(h_) + ", " +
                          std::to_string(w_) + ")");
    }
    data.assign(static_cast<std::size_t>(n) * c * h * w, 0.0);
}

bool Tensor4::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix::Matrix(int r, int c) : rows(r), cols(c) {
    if (r < 1 || c < 1) {
        throw shape_error("Matrix dims must be >= 1, got " + std::to_string(r) + "x" +
                          std::to_string(c));
    }
    data.assign(static_cast<std::size_t>(r) * c, 0.0);
}

bool Matrix::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw shape_error("matmul: inner dims differ, " + std::to_string(a.rows) + "x" +
                          std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                          std::to_string(b.cols));
    }
    Matrix c(a.rows, b.cols);
    if (macs::enabled()) {
        macs::add(static_cast<std::uint64_t>(a.rows) * a.cols * b.cols);
    }
    const std::size_t work = c.size() * static_cast<std::size_t>(a.cols);
    // i-k-j order: streams rows of b, accumulates each output element in
    // fixed k order regardless of how rows are scheduled.
#pragma omp parallel for schedule(static) if (work > (1u << 16))
    for (int i = 0; i < a.rows; ++i) {
        double* crow = &c.data[static_cast<std::size_t>(i) * c.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
    return t;
}

Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

double frob_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

double frob_norm(const Tensor4& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return std::sqrt(s);
}

double frob_diff(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw shape_error("frob_diff: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double frob_diff(const Tensor4& a, const Tensor4& b) {
    if (!a.same_shape(b)) throw shape_error("frob_diff: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double max_abs(const Tensor4& t) {
    double m = 0.0;
    for (double v : t.data) m = std::max(m, std::fabs(v));
    return m;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
    if (!a.same_shape(b)) throw shape_error("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

namespace macs {

namespace {
std::atomic<bool> g_enabled{false};
std::atomic<std::uint64_t> g_total{0};
}  // namespace

void enable(bool on) { g_enabled.store(on, std::memory_order_relaxed); }
bool enabled() { return g_enabled.load(std::memory_order_relaxed); }
void reset() { g_total.store(0, std::memory_order_relaxed); }
void add(std::uint64_t n) { g_total.fetch_add(n, std::memory_order_relaxed); }
std::uint64_t total() { return g_total.load(std::memory_order_relaxed); }

}  // namespace macs

}  // namespace fbc
