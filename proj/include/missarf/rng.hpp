#pragma once

#include <cstdint>
#include <random>

namespace missarf {

// 64-bit finalizer (splitmix64 style). Used to derive independent seed
// streams from a parent seed; statistically independent streams keyed by
// arbitrary 64-bit tags.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream + 0xD1B54A32D192ED03ULL));
}

// Seeded generator with deterministic sub-stream derivation. All randomized
// operations in the library take an Rng; parallel work derives one child per
// task so results are independent of scheduling order. Uniform and normal
// variates are produced by explicit arithmetic (no std::*_distribution) so
// that identical seeds give identical streams regardless of the standard
// library in use.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    // Child generator keyed by a stream tag; derived from the seed, not the
    // current generator state, so derivation commutes with consumption.
    Rng derive(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }
    Rng derive(std::uint64_t a, std::uint64_t b) const {
        return Rng(mix_seed(mix_seed(seed_, a), b));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on the open interval (0, 1); never returns an endpoint, safe
    // to feed into inverse CDFs.
    double uniform01() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (~n + 1) % n;
        for (;;) {
            const std::uint64_t r = gen_();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal();  // standard normal via inverse CDF (stats_math)

  private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace missarf
