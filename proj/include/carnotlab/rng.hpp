#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace carnotlab {

// Finalizer of SplitMix64; a 64-bit mixing bijection.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Child seed for stream `index` under `seed`: the index-th output of the
// SplitMix64 sequence started at `seed`. This is the documented stream
// derivation used everywhere (chunk seeds, per-path streams, bootstrap
// streams); it is part of the reproducibility contract.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed + (index + 1) * 0x9e3779b97f4a7c15ull);
}

// xoshiro256++ with SplitMix64 seeding, plus a polar-method normal sampler.
// Fully self-contained so that streams are bit-stable across standard
// library versions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t st = seed;
        for (auto& w : state_) {
            st += 0x9e3779b97f4a7c15ull;
            w = mix64(st);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1), 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via the Marsaglia polar method (pairs cached).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * scale;
        have_cached_ = true;
        return u * scale;
    }

    double normal(double sd) { return sd * normal(); }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    bool have_cached_ = false;
    double cached_ = 0.0;
};

// Seed layout for reproducible parallel sampling. Paths are grouped into
// fixed-size chunks; chunk c gets child_seed(master_seed, c) and path j
// within the chunk gets child_seed(chunk_seed, j). Results therefore depend
// only on the path index, never on the worker count or schedule.
struct SeedPlan {
    std::uint64_t master_seed = 0;
    std::uint64_t chunk_size = 1024;

    std::uint64_t chunk_seed(std::uint64_t chunk_index) const {
        return child_seed(master_seed, chunk_index);
    }

    std::uint64_t path_base(std::uint64_t path_index) const {
        return child_seed(chunk_seed(path_index / chunk_size), path_index % chunk_size);
    }
};

} // namespace carnotlab
