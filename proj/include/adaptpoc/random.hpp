#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace adaptpoc {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Stateless: output depends only on (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }
};

/// Identifies one independent random stream under a seed. Streams are
/// addressed by a 64-bit id plus a 32-bit lane so that callers can derive
/// substreams as (replicate, stage, group) without coordination.
struct StreamId {
    std::uint64_t id = 0;
    std::uint32_t lane = 0;
};

/// UniformRandomBitGenerator over one Philox stream. Copying an engine copies
/// its position; two engines built from the same (seed, stream) produce the
/// same sequence regardless of which thread uses them.
class StreamEngine {
   public:
    using result_type = std::uint32_t;

    StreamEngine(std::uint64_t seed, StreamId stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0u, stream.lane, static_cast<std::uint32_t>(stream.id),
               static_cast<std::uint32_t>(stream.id >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (used_ == 4) refill();
        return buffer_[used_++];
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform01() noexcept {
        const std::uint64_t hi = (*this)();
        const std::uint64_t lo = (*this)();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

   private:
    void refill() noexcept {
        buffer_ = Philox4x32::block(ctr_, key_);
        ++ctr_[0];
        used_ = 0;
    }

    Philox4x32::Key key_;
    Philox4x32::Counter ctr_;
    Philox4x32::Counter buffer_{};
    int used_ = 4;
};

/// Mixes several integers into one 64-bit stream id (splitmix64 finalizer).
constexpr std::uint64_t mix_stream(std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace adaptpoc
