#pragma once

// Deterministic random number generation. Everything downstream
// (environment resets, exploration, minibatch sampling, mutation draws,
// resampling) pulls from streams derived here, so results are bit-exact
// across runs and platforms. The standard <random> distributions are
// implementation-defined and deliberately avoided.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace rlmt {

// splitmix64: used to expand seeds and to mix derivation material.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a on bytes; the content hash used for run ids and seed derivation.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffULL;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256++ stream seeded through splitmix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Unbiased integer in [0, n) via rejection on the top range.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller; one cached deviate.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

    // Fisher-Yates partial shuffle: k distinct indices out of [0, n).
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(next_below(static_cast<std::uint64_t>(n - i)));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stable seed derivation: mixes a base seed with labeled context (role
// strings, ids, indices) so independent consumers get independent streams
// and the mapping never depends on container iteration order.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view role) {
    std::uint64_t h = fnv1a64_u64(base, 0xcbf29ce484222325ULL);
    h = fnv1a64(role, h);
    std::uint64_t sm = h;
    return splitmix64(sm);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view role,
                                 std::uint64_t index) {
    std::uint64_t h = fnv1a64_u64(base, 0xcbf29ce484222325ULL);
    h = fnv1a64(role, h);
    h = fnv1a64_u64(index, h);
    std::uint64_t sm = h;
    return splitmix64(sm);
}

}  // namespace rlmt
