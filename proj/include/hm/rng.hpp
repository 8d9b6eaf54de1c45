#pragma once

#include <cmath>
#include <cstdint>

namespace hm {

namespace detail {

// SplitMix64 finalizer. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

} // namespace detail

/// Counter-based random stream. A stream is fully determined by its key, so
/// per-path substreams can be derived in O(1) and consumed on any worker in
/// any order: identical (seed, stream_id) gives an identical sequence.
class RngStream {
public:
    RngStream() = default; // the all-zero key is the plain SplitMix64 stream

    static RngStream from_seed(std::uint64_t seed, std::uint64_t stream_id = 0) {
        RngStream s;
        s.key_ = detail::mix64(detail::mix64(seed + detail::kGolden) + stream_id);
        s.counter_ = 0;
        s.have_cached_ = false;
        return s;
    }

    /// Derive an independent child stream. Does not disturb this stream.
    RngStream substream(std::uint64_t k) const {
        RngStream s;
        s.key_ = detail::mix64(key_ + detail::kGolden * (k + 1));
        s.counter_ = 0;
        s.have_cached_ = false;
        return s;
    }

    std::uint64_t next_u64() {
        return detail::mix64(key_ + (++counter_) * detail::kGolden);
    }

    /// Uniform on (0,1).
    double uniform() {
        const std::uint64_t u = next_u64() >> 11; // 53 bits
        return (static_cast<double>(u) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the sine partner is cached.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Rayleigh(1): density r*exp(-r^2/2) on r >= 0.
    double rayleigh() { return std::sqrt(-2.0 * std::log(uniform())); }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace hm
