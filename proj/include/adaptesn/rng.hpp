#pragma once

// Deterministic random numbers for reproducible runs.
//
// The engine is xoshiro256** seeded through splitmix64. Both algorithms are
// fully specified integer recurrences, so a given seed yields the same
// stream on every platform and compiler. The uniform and normal transforms
// below are implemented here rather than taken from <random>, whose
// distributions are implementation-defined.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace adaptesn {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent child seed from a parent seed and a stream tag.
///
/// Used to split the master seed into per-pair and per-purpose streams:
/// `derive_seed(master, tag)` is one splitmix64 step applied to
/// `master ^ (tag * golden)`.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept
{
    std::uint64_t state = parent ^ (tag * 0xD1B54A32D192ED03ULL);
    return splitmix64(state);
}

class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256(std::uint64_t seed) noexcept
    {
        std::uint64_t sm = seed;
        for (auto& word : s_) {
            word = splitmix64(sm);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform01() noexcept
    {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    constexpr double uniform(double lo, double hi) noexcept
    {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal variate (Box-Muller, second value cached).
    double normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform integer in [0, bound). `bound` must be positive.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept
    {
        // Lemire's multiply-shift with rejection keeps the draw unbiased.
        std::uint64_t x = (*this)();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = (*this)();
                m = static_cast<__uint128_t>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace adaptesn
