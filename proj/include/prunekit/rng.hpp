#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace prunekit {

// sampling helpers on top of mt19937 so streams do not depend on the standard
// library's unspecified distribution algorithms

inline float uniform_float(std::mt19937& g, float lo, float hi) {
    const std::uint32_t r = g() >> 8; // 24 mantissa bits
    return lo + (hi - lo) * (r * (1.0f / 16777216.0f));
}

inline double uniform_double(std::mt19937& g, double lo, double hi) {
    const std::uint64_t hi32 = g(), lo32 = g();
    const std::uint64_t r = ((hi32 << 32) | lo32) >> 11; // 53 bits
    return lo + (hi - lo) * (r * (1.0 / 9007199254740992.0));
}

inline std::uint32_t bounded_uint(std::mt19937& g, std::uint32_t n) {
    return static_cast<std::uint32_t>((static_cast<std::uint64_t>(g()) * n) >> 32);
}

template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937& g) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = bounded_uint(g, static_cast<std::uint32_t>(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace prunekit
