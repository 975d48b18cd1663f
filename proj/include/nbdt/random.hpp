#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace nbdt
{
    /// Seeded generator with platform-independent output.
    ///
    /// The engine is the standard 64-bit Mersenne Twister, whose sequence is
    /// fixed by the C++ standard. Library distributions are not (their
    /// algorithms vary between standard libraries), so the conversions below
    /// are done by hand.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : engine_(seed) {}

        std::uint64_t next_u64() { return engine_(); }

        /// Uniform double in [0, 1) with 53 random bits.
        double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

        /// Uniform integer in [0, n) by rejection, unbiased.
        std::uint64_t below(std::uint64_t n)
        {
            if (n == 0)
            {
                throw std::invalid_argument("Rng::below(0)");
            }
            const std::uint64_t threshold = (0 - n) % n;
            for (;;)
            {
                const std::uint64_t x = engine_();
                if (x >= threshold)
                {
                    return x % n;
                }
            }
        }

        /// Uniform integer in [lo, hi].
        std::uint64_t between(std::uint64_t lo, std::uint64_t hi)
        {
            if (hi < lo)
            {
                throw std::invalid_argument("Rng::between: empty interval");
            }
            if (lo == 0 && hi == UINT64_MAX)
            {
                return engine_();
            }
            return lo + below(hi - lo + 1);
        }

        bool chance(double p) { return uniform01() < p; }

    private:
        std::mt19937_64 engine_;
    };

    /// Stream derivation so independent consumers of one seed do not share draws.
    constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
    {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
} // namespace nbdt
