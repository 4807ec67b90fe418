#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace isgan {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t k) {
    // one splitmix round keyed by k
    std::uint64_t s = h ^ (k + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
    return splitmix64(s);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}
}  // namespace detail

/// Counter-based deterministic stream. State is a single u64, so checkpoints
/// and worker-local substreams are trivial: derive() gives an independent
/// stream keyed by coordinates (stage, epoch, batch, slot, ...), which makes
/// batch content reproducible regardless of worker count or resume point.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0x6A09E667F3BCC908ULL) : state_(seed) {}

    template <typename... Keys>
    RngStream derive(Keys... keys) const {
        std::uint64_t h = state_;
        ((h = detail::mix(h, static_cast<std::uint64_t>(keys))), ...);
        return RngStream(detail::mix(h, 0xD1B54A32D192ED03ULL));
    }

    RngStream derive_str(std::string_view tag) const {
        return derive(detail::fnv1a(tag));
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    /// uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// standard normal via Box-Muller (no cached second value, so the stream
    /// state remains a plain counter)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// uniform integer in [0, n)
    int uniform_int(int n) {
        return n <= 1 ? 0 : static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t state_;
};

}  // namespace isgan
