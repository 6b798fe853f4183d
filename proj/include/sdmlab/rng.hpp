#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace sdmlab {

namespace detail {

/// 64-bit finalizer from SplitMix64 (Vigna). Bijective, well mixed.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a_string(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a_bytes(s.data(), s.size(), h);
}

} // namespace detail

/**
 * Deterministic random stream with labeled child derivation.
 *
 * A stream is identified by a 64-bit root; draws advance an internal counter
 * through SplitMix64. Child streams are derived by mixing the root with a
 * label and up to two ordinals, so the same (root, label, ordinals) always
 * yields the same stream regardless of which thread asks for it or in which
 * order. That property is what lets the parallel kernels reproduce the serial
 * results bit for bit.
 */
class SeedStream {
  public:
    explicit SeedStream(uint64_t seed)
        : root_(detail::mix64(seed ^ 0x5dec0de5dec0de5dULL)), state_(root_) {}

    /// Next raw 64-bit draw.
    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). bound must be positive.
    /// Multiply-shift; bias is below 2^-64 per draw and identical on every
    /// platform, which matters more here than exactness.
    uint64_t next_below(uint64_t bound) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * bound) >> 64);
    }

    /// Standard normal via Box-Muller. One value per call and no caching, so
    /// the draw count per event stays fixed.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Child stream for a labeled subcomponent. Derivation uses the root
    /// only, never the draw position, so children are order-independent.
    SeedStream child(std::string_view label, uint64_t a = 0, uint64_t b = 0) const {
        uint64_t s = detail::mix64(root_ ^ detail::fnv1a_string(label));
        s = detail::mix64(s ^ detail::mix64(a ^ 0x9e3779b97f4a7c15ULL));
        s = detail::mix64(s ^ detail::mix64(b ^ 0xc2b2ae3d27d4eb4fULL));
        SeedStream out(raw_tag{});
        out.root_ = s;
        out.state_ = s;
        return out;
    }

    /// The derivation root (never advanced by draws).
    uint64_t root() const { return root_; }

  private:
    struct raw_tag {};
    explicit SeedStream(raw_tag) : root_(0), state_(0) {}

    uint64_t root_;
    uint64_t state_;
};

} // namespace sdmlab
