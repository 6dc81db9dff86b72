#include "fbc/planner.hpp"

#include <algorithm>
#include <cmath>

namespace fbc {

void LayerShape::validate() const {
    if (n < 1 || c < 1 || w < 1 || h < 1) {
        throw shape_error("LayerShape fields must be >= 1, got (n=" + std::to_string(n) +
                          ", c=" + std::to_string(c) + ", w=" + std::to_string(w) +
                          ", h=" + std::to_string(h) + ")");
    }
}

namespace {

void check_m(int m) {
    if (m < 1) throw shape_error("basis count m must be >= 1, got " + std::to_string(m));
}

void check_split(const LayerShape& shape, int s) {
    if (s < 1 || s > shape.c || shape.c % s != 0) {
        throw shape_error("split count s = " + std::to_string(s) + " does not divide c = " +
                          std::to_string(shape.c));
    }
}

}  // namespace

double rate_filter(const LayerShape& shape, int m) {
    shape.validate();
    check_m(m);
    return static_cast<double>(m) / shape.n +
           static_cast<double>(m) / (static_cast<double>(shape.c) * shape.w * shape.h);
}

double rate_channel(const LayerShape& shape, int m) {
    shape.validate();
    check_m(m);
    return static_cast<double>(m) / (static_cast<double>(shape.n) * shape.c) +
           static_cast<double>(m) / (static_cast<double>(shape.w) * shape.h);
}

double rate_split(const LayerShape& shape, int m, int s) {
    shape.validate();
    check_m(m);
    check_split(shape, s);
    const int p = shape.c / s;
    return static_cast<double>(m) / (static_cast<double>(shape.n) * s) +
           static_cast<double>(m) / (static_cast<double>(p) * shape.w * shape.h);
}

std::vector<int> divisors(int c) {
    std::vector<int> out;
    for (int d = 1; d * d <= c; ++d) {
        if (c % d != 0) continue;
        out.push_back(d);
        if (d != c / d) out.push_back(c / d);
    }
    std::sort(out.begin(), out.end());
    return out;
}

SplitChoice optimal_split(const LayerShape& shape, int m) {
    shape.validate();
    check_m(m);
    SplitChoice out;
    const double n = shape.n, c = shape.c, wh = static_cast<double>(shape.w) * shape.h;
    out.s_star = std::sqrt(c * wh / n);
    out.p_star = std::sqrt(n * c / wh);

    // rate_split as a function of p is convex, so the best divisor is one
    // of the two bracketing p*. Between them, the smaller p wins exactly
    // when lo*hi*w*h > n*c; equality is the tie, resolved toward more
    // splits.
    const std::vector<int> divs = divisors(shape.c);
    int lo = divs.front(), hi = divs.back();
    for (int d : divs) {
        if (d <= out.p_star) lo = d;
    }
    for (auto it = divs.rbegin(); it != divs.rend(); ++it) {
        if (*it >= out.p_star) hi = *it;
    }

    int p;
    if (lo == hi) {
        p = lo;
    } else {
        const long long lhs = static_cast<long long>(lo) * hi * shape.w * shape.h;
        const long long rhs = static_cast<long long>(shape.n) * shape.c;
        p = (lhs >= rhs) ? lo : hi;
    }
    out.p = p;
    out.s = shape.c / p;
    return out;
}

Budget count_params(const LayerShape& shape, int m, int s, int shared_across) {
    shape.validate();
    check_m(m);
    check_split(shape, s);
    if (shared_across < 1) throw shape_error("shared_across must be >= 1");
    const std::uint64_t p = static_cast<std::uint64_t>(shape.c) / s;
    const std::uint64_t wh = static_cast<std::uint64_t>(shape.w) * shape.h;
    Budget b;
    b.params_compressed = static_cast<std::uint64_t>(m) * p * wh +
                          static_cast<std::uint64_t>(shared_across) * m * shape.n * s;
    b.params_original = static_cast<std::uint64_t>(shared_across) * shape.n * shape.c * wh;
    b.ratio = static_cast<double>(b.params_compressed) / static_cast<double>(b.params_original);
    return b;
}

Budget count_flops(const LayerShape& shape, int m, int s, int out_h, int out_w) {
    shape.validate();
    check_m(m);
    check_split(shape, s);
    if (out_h < 1 || out_w < 1) throw shape_error("count_flops: output dims must be >= 1");
    const std::uint64_t p = static_cast<std::uint64_t>(shape.c) / s;
    const std::uint64_t wh = static_cast<std::uint64_t>(shape.w) * shape.h;
    const std::uint64_t hw_out = static_cast<std::uint64_t>(out_h) * out_w;
    Budget b = count_params(shape, m, s, 1);
    b.flops_original = static_cast<std::uint64_t>(shape.n) * shape.c * wh * hw_out;
    b.flops_compressed = static_cast<std::uint64_t>(m) * s * p * wh * hw_out +
                         static_cast<std::uint64_t>(shape.n) * m * s * hw_out;
    return b;
}

}  // namespace fbc
