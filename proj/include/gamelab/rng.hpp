#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "gamelab/util.hpp"

namespace gamelab {

// Counter-based RNG: Philox2x64-10. A 128-bit counter and a 64-bit key map to
// a 128-bit block through ten multiply/xor rounds. Every draw is a pure
// function of (seed, path, step, player), so simulations are bitwise
// reproducible regardless of thread count or evaluation order.
struct Philox2x64 {
    static constexpr std::uint64_t kMultiplier = 0xD2B74407B1CE6E93ULL;
    static constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;

    static std::array<std::uint64_t, 2> block(std::uint64_t c0, std::uint64_t c1, std::uint64_t key) {
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 prod = static_cast<unsigned __int128>(kMultiplier) * c0;
            const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
            const std::uint64_t lo = static_cast<std::uint64_t>(prod);
            c0 = hi ^ key ^ c1;
            c1 = lo;
            key += kWeyl;
        }
        return {c0, c1};
    }
};

// Uniform in (0,1): 53 random bits, offset so 0 is excluded.
inline double uniform01_from_bits(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Deterministic stream of standard normals indexed by (path, step, player).
// `stream` separates independent uses that share a seed.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(seed ^ (stream * 0xA24BAED4963EE407ULL)) {}

    // One standard normal per (path, step, player) tuple (Box-Muller, cosine branch).
    double normal(std::uint64_t path, std::uint64_t step, std::uint32_t player) const {
        const std::uint64_t c1 = step | (static_cast<std::uint64_t>(player) << 40);
        const auto blk = Philox2x64::block(path, c1, key_);
        const double u1 = uniform01_from_bits(blk[0]);
        const double u2 = uniform01_from_bits(blk[1]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Normal increment driving one coarse step that spans `substeps` fine
    // steps starting at fine index `fine_step`. Aggregating fine draws keeps
    // Brownian paths nested across step-size refinements, so estimates at
    // different dt are pathwise comparable.
    double normal_aggregated(std::uint64_t path, std::uint64_t fine_step, int substeps, std::uint32_t player) const {
        if (substeps <= 1) return normal(path, fine_step, player);
        double s = 0.0;
        for (int j = 0; j < substeps; ++j) s += normal(path, fine_step + static_cast<std::uint64_t>(j), player);
        return s / std::sqrt(static_cast<double>(substeps));
    }

    std::uint64_t key() const { return key_; }

  private:
    std::uint64_t key_;
};

}  // namespace gamelab
