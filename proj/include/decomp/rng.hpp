#pragma once

#include "decomp/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace decomp {

/// Counter-based generator: draw k is a SplitMix64 finalizer applied to
/// key + k * golden, so a stream is fully described by (seed, counter) and
/// produces identical sequences on every platform.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : seed_{seed}, key_{mix(seed ^ 0x5851f42d4c957f2dULL)} {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    /// Independent stream keyed by (this stream's seed, id).
    RngStream substream(std::uint64_t id) const {
        return RngStream(mix(key_ + mix(id + 0x9e3779b97f4a7c15ULL)));
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0)
            throw std::invalid_argument("uniform_index: empty range");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal draw (Box-Muller, both outputs used).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// `count` distinct indices from [0, n), in draw order (partial Fisher-Yates).
    std::vector<Index> sample_without_replacement(Index n, Index count) {
        if (count < 0 || count > n)
            throw std::invalid_argument("sample_without_replacement: count exceeds range");
        std::vector<Index> pool(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i)
            pool[static_cast<std::size_t>(i)] = i;
        for (Index i = 0; i < count; ++i) {
            const auto j = i + static_cast<Index>(uniform_index(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        }
        pool.resize(static_cast<std::size_t>(count));
        return pool;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Matrix of independent standard normal entries, filled row by row.
inline Matrix standard_normal_matrix(RngStream &rng, Index rows, Index cols) {
    if (rows <= 0 || cols <= 0)
        throw std::invalid_argument("standard_normal_matrix: dimensions must be positive");
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            out(i, j) = rng.normal();
    return out;
}

} // namespace decomp
