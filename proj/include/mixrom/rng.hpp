#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace mixrom {

/// Derive a named sub-seed from a root seed. Every source of randomness in
/// the project draws from one root seed through labeled streams so that
/// components can be retrained independently yet reproducibly.
inline std::uint64_t seed_for(std::uint64_t root, std::string_view label) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a 64
    for (char c : label) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    std::uint64_t z = root ^ h;
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic RNG with portable uniform/normal draws. std::mt19937_64 is
/// fully specified by the standard; the distributions are hand-rolled because
/// std::normal_distribution's algorithm is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        cache_ = r * std::sin(theta);
        have_cache_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool have_cache_ = false;
    double cache_ = 0.0;
};

} // namespace mixrom
