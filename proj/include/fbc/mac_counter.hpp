#pragma once

#include <cstdint>

namespace fbc::macs {

// Multiply-accumulate instrumentation. Off by default. When enabled, the
// dense kernels add their exact inner-loop MAC counts (one add per GEMM
// call, M*N*K each), so the totals match the arithmetic the loops perform.
void enable(bool on);
bool enabled();
void reset();
void add(std::uint64_t n);
std::uint64_t total();

}  // namespace fbc::macs
