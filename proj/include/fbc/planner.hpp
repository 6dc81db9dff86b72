#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbc/errors.hpp"

namespace fbc {

/// Static shape of one convolution layer: n output channels, c input
/// channels, w x h kernel pixels.
struct LayerShape {
    int n = 0, c = 0, w = 0, h = 0;

    void validate() const;
    bool operator==(const LayerShape&) const = default;
};

/// Per-layer decomposition choice.
struct PlanEntry {
    std::string layer_id;
    int m = 0;
    int s = 1;
    int p = 0;                 // c / s
    std::string share_group;   // empty = unshared
};

struct DecompositionPlan {
    std::vector<PlanEntry> entries;
    std::string strategy = "none";  // none | block | group | network
};

/// Exact parameter / MAC budget. `ratio` is always the parameter ratio.
struct Budget {
    std::uint64_t params_original = 0;
    std::uint64_t params_compressed = 0;
    std::uint64_t flops_original = 0;
    std::uint64_t flops_compressed = 0;
    double ratio = 0.0;

    double flops_ratio() const {
        return flops_original ? static_cast<double>(flops_compressed) / flops_original : 0.0;
    }
};

/// m/n + m/(c*w*h): whole 3-D filters as the basis element.
double rate_filter(const LayerShape& shape, int m);

/// m/(n*c) + m/(w*h): single 2-D channels as the basis element.
double rate_channel(const LayerShape& shape, int m);

/// m/(n*s) + m/(p*w*h) with p = c/s: depth-p splits as the basis element.
double rate_split(const LayerShape& shape, int m, int s);

struct SplitChoice {
    double s_star = 0.0, p_star = 0.0;  // continuous minimizers
    int s = 0, p = 0;                   // quantized to divisors of c
};

/// Continuous optimum s* = sqrt(c*w*h/n), p* = sqrt(n*c/(w*h)), then p
/// quantized to the divisor of c bracketing p* that attains the smaller
/// rate_split (a tie picks the smaller p, i.e. more splits).
SplitChoice optimal_split(const LayerShape& shape, int m);

/// Parameters of `shared_across` identically-shaped layers sharing one
/// basis: compressed = m*p*w*h + shared_across*m*n*s. Biases excluded.
Budget count_params(const LayerShape& shape, int m, int s, int shared_across);

/// Per-sample MACs: original n*c*w*h*oh*ow; compressed = basis stage
/// (m*s)*p*w*h*oh*ow plus 1x1 combine n*(m*s)*oh*ow.
Budget count_flops(const LayerShape& shape, int m, int s, int out_h, int out_w);

/// Divisors of c in ascending order.
std::vector<int> divisors(int c);

}  // namespace fbc
