#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

namespace knobtune {

/// Mixes an arbitrary number of 64-bit words into one seed (splitmix64 finalizer).
/// Used to derive independent, reproducible sub-streams from a base seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return mix_seed(mix_seed(a) ^ b, rest...);
}

/// FNV-1a; a deterministic cross-platform string hash for seed derivation.
inline std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seeded random source with distribution transforms implemented by hand.
/// std::mt19937_64 output is fully specified by the standard; the standard
/// library's distributions are not, so uniform/normal draws here are
/// bit-reproducible across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        // modulo bias is < 2^-40 for any n this project uses
        return static_cast<std::size_t>(engine_() % n);
    }

    /// Standard normal via Box-Muller (no cached spare; deterministic stream).
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_index(i)]);
    }

    /// Random permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        shuffle(p);
        return p;
    }

    /// k distinct elements sampled without replacement from `pool`.
    std::vector<std::size_t> subset(const std::vector<std::size_t>& pool, std::size_t k) {
        std::vector<std::size_t> v = pool;
        for (std::size_t i = 0; i < k && i < v.size(); ++i)
            std::swap(v[i], v[i + uniform_index(v.size() - i)]);
        v.resize(std::min(k, v.size()));
        return v;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace knobtune
