#pragma once

#include <cmath>
#include <cstdint>

namespace srp {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based random stream: output depends only on (key, counter), so a
/// given (seed, stream id, draw index) always yields the same value, in any
/// execution order. Streams are keyed by a (block, branch, batch) triple.
struct RngStream {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;

    std::uint64_t next_u64() {
        return detail::mix64(key ^ detail::mix64(counter++));
    }

    /// Uniform over [0, n) via 128-bit multiply-shift.
    std::uint32_t uniform_int(std::uint32_t n) {
        return static_cast<std::uint32_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal() {
        // Box-Muller; consumes two draws, second component discarded.
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Gamma(shape, 1) via Marsaglia-Tsang, with the alpha<1 boost.
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        double x = gamma(a);
        double y = gamma(b);
        return x / (x + y);
    }
};

/// Derives an independent stream for a (seed, block, branch, batch) id.
/// `step` reserves a fresh draw window per forward call so masks are
/// resampled every iteration while staying reproducible.
inline RngStream make_stream(std::uint64_t seed, std::uint64_t block, std::uint64_t branch,
                             std::uint64_t batch, std::uint64_t step = 0) {
    std::uint64_t k = detail::mix64(seed);
    k = detail::mix64(k ^ block);
    k = detail::mix64(k ^ (branch << 20));
    k = detail::mix64(k ^ (batch << 40));
    RngStream s{k, step << 8};
    return s;
}

}  // namespace srp
