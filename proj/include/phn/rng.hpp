#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace phn {

// Deterministic RNG built on mt19937_64 with hand-rolled distributions.
// std::normal_distribution and friends are implementation-defined, so we
// do not use them anywhere reproducibility matters.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, two uniforms per draw, no spare caching.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    double gumbel() { return -std::log(-std::log(uniform())); }

    // Unbiased integer in [0, n). Rejection sampling keeps the stream
    // platform-independent.
    std::size_t index(std::size_t n) {
        if (n <= 1) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    template <class T> void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}
} // namespace detail

// Derives a labeled substream seed from the master seed. Each subsystem
// (init, batch, gumbel, aug, ...) gets its own stream so toggling one does
// not perturb the others.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    return detail::splitmix64(master ^ detail::fnv1a(label));
}

inline Rng derive_rng(std::uint64_t master, std::string_view label) {
    return Rng(derive_seed(master, label));
}

} // namespace phn
