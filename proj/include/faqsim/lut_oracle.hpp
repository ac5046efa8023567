#pragma once

// Brute-force reference for the lookup table. Shares nothing with
// build_lut: it pushes every code through apply_faults and scans the
// readback values directly.

#include <cstdlib>
#include <limits>

#include "faultmodel.hpp"

namespace faqsim {

inline int oracle_nearest(const FaultPattern& pattern, int value)
{
    const int b = pattern.bitwidth();
    const int lo = -(1 << (b - 1));
    const int hi = (1 << (b - 1)) - 1;
    if (value < lo || value > hi) throw IndexError("oracle_nearest: value out of range");

    int best = 0;
    int best_distance = std::numeric_limits<int>::max();
    for (int code = lo; code <= hi; ++code) {
        const int read = apply_faults(code, pattern);
        const int d = std::abs(read - value);
        if (d < best_distance || (d == best_distance && read < best)) {
            best = read;
            best_distance = d;
        }
    }
    return best;
}

}  // namespace faqsim
