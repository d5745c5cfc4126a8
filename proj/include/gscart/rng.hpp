// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gsc {

/// Deterministic random source.
///
/// Wraps std::mt19937_64 but generates uniforms and normals itself
/// (53-bit uniforms, Box-Muller normals) so that streams are bit-identical
/// across platforms and standard-library versions. Every randomized
/// operation in the library takes one of these explicitly.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; never zero, safe under log().
    double uniform_pos() { return (double)((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be >= 1.
    std::uint64_t uniform_int(std::uint64_t n)
    {
        // modulo rejection keeps the draw exactly uniform
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal draw (Box-Muller, cached spare).
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Independent child stream for worker `stream`; deterministic in (seed, stream).
    Rng fork(std::uint64_t stream) const
    {
        return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ull)));
    }

    std::uint64_t seed() const { return seed_; }

  private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace gsc
