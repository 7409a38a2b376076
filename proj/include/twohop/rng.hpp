#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>

namespace twohop {

// Philox4x32-10 counter-based generator. A draw is a pure function of
// (seed, stream, counter), so parallel schedules cannot change results.
namespace philox {

inline std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t stream,
                                          std::uint64_t counter) {
    std::uint32_t k0 = static_cast<std::uint32_t>(seed);
    std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
    std::array<std::uint32_t, 4> x = {
        static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * x[0];
        const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * x[2];
        const std::array<std::uint32_t, 4> y = {
            static_cast<std::uint32_t>(p1 >> 32) ^ x[1] ^ k0, static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ x[3] ^ k1, static_cast<std::uint32_t>(p0)};
        x = y;
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
    }
    return x;
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t v = (std::uint64_t{hi} << 32) | lo;
    return static_cast<double>(v >> 11) * 0x1.0p-53;  // [0, 1)
}

}  // namespace philox

/// One standard-normal pair per (seed, stream, counter) via Box-Muller.
inline std::pair<double, double> normal_pair(std::uint64_t seed, std::uint64_t stream,
                                             std::uint64_t counter) {
    const auto b = philox::block(seed, stream, counter);
    const double u1 = 1.0 - philox::to_unit(b[0], b[1]);  // (0, 1], keeps log finite
    const double u2 = philox::to_unit(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

/// Circularly symmetric complex Gaussian entry with E|x|^2 = 2*scale^2.
inline std::complex<double> complex_gaussian(std::uint64_t seed, std::uint64_t stream,
                                             std::uint64_t counter, double scale) {
    const auto [re, im] = normal_pair(seed, stream, counter);
    return {scale * re, scale * im};
}

}  // namespace twohop
