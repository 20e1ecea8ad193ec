#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace gmclab {

/// Counter-based random stream (Philox4x32, 10 rounds).
///
/// Every Monte Carlo consumer owns one stream keyed by
/// (master seed, realization index, layer index).  Distinct keys give
/// statistically independent streams without any shared state, so
/// realizations can be generated in any order -- or concurrently -- and the
/// draw sequence for a given key never depends on what other streams did.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed,
                 std::uint64_t realization = 0,
                 std::uint64_t layer = 0)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          block_{0, 0,
                 mix32(realization, 0x243f6a88u) ^ mix32(layer, 0x85a308d3u),
                 mix32(realization, 0x13198a2eu) + mix32(layer, 0x03707344u)} {
    }

    /// Raw 10-round Philox4x32 block function (exposed for known-answer tests).
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += 0x9E3779B9u; // golden-ratio Weyl increment
            key[1] += 0xBB67AE85u; // sqrt(3)-1 Weyl increment
        }
        return ctr;
    }

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    /// Uniform on (0, 1]: 53-bit resolution, never exactly zero.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
    }

    /// Standard normal via Box-Muller (caches the second deviate).
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    static std::uint32_t mix32(std::uint64_t v, std::uint32_t salt) {
        // SplitMix64 finalizer, folded to 32 bits.
        v += 0x9E3779B97f4A7C15ull + salt;
        v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ull;
        v = (v ^ (v >> 27)) * 0x94D049BB133111EBull;
        v ^= v >> 31;
        return static_cast<std::uint32_t>(v ^ (v >> 32));
    }

    static std::array<std::uint32_t, 4> single_round(
        const std::array<std::uint32_t, 4>& ctr,
        const std::array<std::uint32_t, 2>& key) {
        const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
        const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }

    void refill() {
        buf_ = block(block_, key_);
        pos_ = 0;
        if (++block_[0] == 0) ++block_[1]; // 64-bit in-stream position
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> block_;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace gmclab
