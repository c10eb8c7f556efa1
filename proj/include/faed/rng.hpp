#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace faed {

/// Stafford "mix13" finalizer, the output function of splitmix64.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Combine a parent stream id with a child index into a new stream id.
constexpr std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t child) noexcept {
    return mix64(parent ^ mix64(child + 0x9E3779B97F4A7C15ULL));
}

/// Counter-based generator. Draw n of a stream is a pure function of
/// (seed, stream_id, n), so any schedule that hands each unit of work its own
/// stream reproduces the same numbers.
///
///   key  = mix64(mix64(seed) ^ stream_id)
///   u64  = mix64(key + 0x9E3779B97F4A7C15 * (counter + 1))
///   unit = (u64 >> 11) * 2^-53
///   normal: Box-Muller cosine branch, u1 = ((u64 >> 11) + 1) * 2^-53, u2 = unit
class RngStream {
public:
    constexpr RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0) noexcept
        : seed_(seed), stream_id_(stream_id), counter_(counter), key_(mix64(mix64(seed) ^ stream_id)) {}

    constexpr std::uint64_t seed() const noexcept { return seed_; }
    constexpr std::uint64_t stream_id() const noexcept { return stream_id_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

    constexpr std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(key_ + 0x9E3779B97F4A7C15ULL * counter_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t index(std::uint64_t n) noexcept {
        auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    double normal() noexcept {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Fresh stream keyed on this stream's identity (not its position).
    constexpr RngStream substream(std::uint64_t child) const noexcept {
        return RngStream(seed_, derive_stream(stream_id_, child));
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t counter_;
    std::uint64_t key_;
};

}  // namespace faed
