#pragma once

#include <cstdint>

namespace cansim {

// Deterministic RNG stack. We avoid <random> distributions on purpose:
// simulation output must be byte-identical for a given seed, and the
// standard library does not pin distribution algorithms.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(uint64_t seed = 1) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    // xoshiro256**
    uint64_t next() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform on [0,1)
    double uniform() { return (next() >> 11) * 0x1.0p-53; }

    // uniform on [lo,hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform() < p;
    }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        // multiply-shift; bias is negligible for our n (<< 2^64)
        unsigned __int128 m = (unsigned __int128)next() * n;
        return (uint64_t)(m >> 64);
    }

  private:
    uint64_t s_[4];
};

// Stable substream derivation so per-node / per-trial streams are
// independent of evaluation order.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t s = master ^ (0xa0761d6478bd642full + stream * 0xe7037ed1a0b428dbull);
    return splitmix64(s);
}

}  // namespace cansim
