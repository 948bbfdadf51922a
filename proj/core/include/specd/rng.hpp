#pragma once

#include <cstdint>

namespace specd {

// Deterministic 64-bit generator (splitmix64). Self-contained so streams are
// bit-reproducible across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Independent child stream; used to give each grid cell / session its own
    // RNG derived from (master seed, index).
    static Rng derive(std::uint64_t master_seed, std::uint64_t index) {
        Rng mixer(master_seed ^ (0xa0761d6478bd642fULL * (index + 1)));
        return Rng(mixer.next_u64());
    }

private:
    std::uint64_t state_;
};

}  // namespace specd
