#pragma once

// Portable random helpers. std::mt19937_64 has a sequence fixed by the
// standard; the std:: distributions do not, so the conversions below are
// done by hand to keep every seeded artifact identical across toolchains.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace faqsim {

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += golden_gamma;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seed of substream `stream` derived from `seed`. Used for per-row fault
// generation and for the fault-map / data / init split of experiment seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    return splitmix64(seed + (stream + 1) * golden_gamma);
}

namespace seed_stream {
inline constexpr std::uint64_t fault_map = 1;
inline constexpr std::uint64_t data = 2;
inline constexpr std::uint64_t init = 3;
}  // namespace seed_stream

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n > 0. Rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool coin() { return (engine_() >> 63) != 0; }

    // Standard normal via Box-Muller; one draw per call.
    double normal()
    {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class It>
    void shuffle(It first, It last)
    {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace faqsim
