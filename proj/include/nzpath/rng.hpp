#pragma once

#include <cmath>
#include <random>

namespace nzpath {

// All random draws in the project go through these helpers rather than the
// <random> distributions. The distributions' output sequences are not pinned
// by the standard, while mt19937_64 itself is, so mapping engine words to
// doubles by hand makes every seeded stream an exact, portable contract.

/// Uniform in [0, 1) with 53-bit resolution. Consumes one engine word.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1p-53;
}

/// Uniform in (0, 1]. Consumes one engine word.
inline double uniform01_pos(std::mt19937_64& gen) {
    return (static_cast<double>(gen() >> 11) + 1.0) * 0x1p-53;
}

inline double uniform_in(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

/// Standard normal via Box-Muller. Consumes exactly two engine words per
/// draw and keeps no cached spare, so the word count per draw is fixed.
inline double standard_normal(std::mt19937_64& gen) {
    const double u1 = uniform01_pos(gen);
    const double u2 = uniform01(gen);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace nzpath
