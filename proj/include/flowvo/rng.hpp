#pragma once

#include <cstdint>
#include <random>

namespace flowvo {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

/// Derives an independent sub-seed for a named stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return detail::splitmix64(seed + 0x9E3779B97F4A7C15ull * (stream + 1));
}

/// Order-free lattice hash: one uniform value in [-1, 1] per (seed, octave, i, j).
inline double lattice_noise(std::uint64_t seed, int octave, std::int64_t i, std::int64_t j) {
    std::uint64_t h = detail::splitmix64(seed ^ 0xA24BAED4963EE407ull);
    h = detail::splitmix64(h + static_cast<std::uint64_t>(octave));
    h = detail::splitmix64(h + static_cast<std::uint64_t>(i) * 0x9FB21C651E98DF25ull);
    h = detail::splitmix64(h + static_cast<std::uint64_t>(j) * 0xD6E8FEB86659FD93ull);
    return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
}

/// Seeded generator with portable draw semantics. mt19937_64 output is pinned
/// by the standard; the mappings below avoid the implementation-defined
/// std::uniform_*_distribution so recorded sequences stay stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1).
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

} // namespace flowvo
