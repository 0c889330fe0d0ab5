#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "pdmp/common.hpp"

namespace pdmp {

namespace detail {

// splitmix64 finalizer; used to derive well-mixed stream keys.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t rotl64(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

// Counter-based stream generator (xoshiro256** core). Every (seed, stream,
// counter) triple yields an independent, replayable stream; chains use
// stream = chain id and counter = step index, so any single step of any chain
// can be reproduced without replaying its history.
class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t counter = 0) {
        std::uint64_t h = 0x243F6A8885A308D3ull;  // arbitrary nonzero start
        h = detail::mix64(h + 0x9E3779B97F4A7C15ull * seed + 1);
        h = detail::mix64(h ^ (0xD1B54A32D192ED03ull * stream + 2));
        h = detail::mix64(h ^ (0x8CB92BA72F3D8DD7ull * counter + 3));
        bool all_zero = true;
        for (auto& w : state_) {
            h = detail::mix64(h + 0x9E3779B97F4A7C15ull);
            w = h;
            all_zero &= (w == 0);
        }
        if (all_zero) state_[0] = 0x1ull;
    }

    std::uint64_t next() {
        const std::uint64_t result = detail::rotl64(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 significant bits.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Unit-rate exponential by inversion.
    double exp1() { return -std::log1p(-u01()); }

    // Inverse-CDF draw from a finite nonnegative weight row; weights need not
    // be normalized. Returns an index in [0, weights.size()).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = u01() * total;
        for (std::size_t j = 0; j + 1 < weights.size(); ++j) {
            u -= weights[j];
            if (u < 0.0) return j;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    // UniformRandomBitGenerator interface.
    std::uint64_t operator()() { return next(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return std::numeric_limits<std::uint64_t>::max(); }

  private:
    std::array<std::uint64_t, 4> state_{};
};

// Replay coordinates of a chain: master seed plus chain id. Step generators
// are derived on demand.
struct SeedSpec {
    std::uint64_t seed = 0;
    std::uint64_t chain = 0;

    Rng at_step(std::uint64_t step) const { return Rng(seed, chain, step); }
    SeedSpec with_chain(std::uint64_t c) const { return SeedSpec{seed, c}; }
};

}  // namespace pdmp
