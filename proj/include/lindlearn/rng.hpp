// Deterministic, stream-splittable random number generation.
//
// Reproducibility contract: every stochastic component draws from an Rng stream
// derived from (master_seed, purpose tags...). Streams are independent of thread
// count and of each other, so pipeline outputs are bit-identical for a given
// master seed on any machine with IEEE-754 doubles.
//
// Core generator: xoshiro256++ (public-domain algorithm by Blackman & Vigna),
// seeded through splitmix64. Self-contained on purpose: std::mt19937 +
// std::normal_distribution are not bit-stable across standard libraries.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "lindlearn/common.hpp"

namespace lindlearn {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable 64-bit string hash (FNV-1a) for deriving stream tags from trace names.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64_next(sm);
    }

    // Derive an independent stream from a master seed and up to three tags.
    // Mixing is nonlinear (splitmix64 chaining), so (seed, a, b) and (seed, a, b+1)
    // give unrelated streams.
    static Rng stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
        // Each tag is folded in through the full avalanche mix; simply XOR-ing
        // between additive advances would let (a=2) alias with (a=1, b=1).
        std::uint64_t sm = master;
        sm = splitmix64_next(sm) ^ a;
        sm = splitmix64_next(sm) ^ b;
        sm = splitmix64_next(sm) ^ c;
        return Rng(splitmix64_next(sm));
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n) by rejection (exact, unbiased).
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) fail_numerical("uniform_below(0)");
        std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller (pair cached). Deterministic draw order.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = TWO_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    cplx gaussian_cplx() {
        double re = gaussian();
        double im = gaussian();
        return {re, im};
    }

  private:
    std::array<std::uint64_t, 4> s_{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lindlearn
