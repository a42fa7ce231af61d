#pragma once

#include <cmath>
#include <cstdint>

namespace tmgan {

// SplitMix64 generator with keyed sub-streams.
//
// Everything random in this codebase is a pure function of (seed, stream
// key, draw index): data generation, weight init and batch shuffling all
// derive their own streams, so reruns are bitwise reproducible and a
// resumed training run can reconstruct exactly the draws it would have
// made.  We deliberately avoid <random> distributions, whose output is
// implementation-defined.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    // Derive an independent stream from a seed and up to three key words
    // (layer index, draw index, ...).  Mixing is one SplitMix64 round per
    // word, which decorrelates nearby keys.
    static Rng stream(std::uint64_t seed, std::uint64_t k0, std::uint64_t k1 = 0,
                      std::uint64_t k2 = 0) {
        Rng r(seed);
        r.state = mix(r.state + 0x9e3779b97f4a7c15ULL + k0);
        r.state = mix(r.state + 0x9e3779b97f4a7c15ULL + k1);
        r.state = mix(r.state + 0x9e3779b97f4a7c15ULL + k2);
        return r;
    }

    std::uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ULL;
        return mix(state);
    }

    // Uniform in [0, 1): 53 random mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Standard normal via Box-Muller.  Uses two fresh uniforms per call and
    // keeps no cached second value, so the draw sequence depends only on
    // how many variates were requested before this one.
    double gaussian() {
        // (0, 1] so the log argument is never zero.
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// Small FNV-1a helper used for checkpoint checksums and string stream keys.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t stream_key(const char* name) {
    std::uint64_t n = 0;
    while (name[n] != '\0') ++n;
    return fnv1a(name, n);
}

}  // namespace tmgan
