#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

namespace qdscope {

// splitmix64 finalizer. Used both as the stream generator and as the seed
// mixing primitive, so derived streams are bit-stable across platforms,
// compilers and thread counts.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Fold one word into a seed (boost-style combine with a splitmix finish).
inline std::uint64_t seed_combine(std::uint64_t seed, std::uint64_t word) {
    return splitmix64(seed ^ (word + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t seed_combine(std::uint64_t seed, double word) {
    return seed_combine(seed, std::bit_cast<std::uint64_t>(word));
}

// Small counter-based stream: splitmix64 sequence + Box-Muller normals.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in (0, 1].
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; caches the second variate.
    double next_normal() {
        if (has_cache_) {
            has_cache_ = false;
            return cache_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cache_ = r * std::sin(a);
        has_cache_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double cache_ = 0.0;
    bool has_cache_ = false;
};

} // namespace qdscope
