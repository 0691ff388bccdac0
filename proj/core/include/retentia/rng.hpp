#pragma once

// Counter-based deterministic random streams. Every stochastic component
// derives its stream from (seed, key...) so results are independent of
// scheduling and call interleaving across entities.

#include <cstdint>
#include <cmath>

namespace retentia::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Combine up to four 64-bit keys into one stream seed.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0, std::uint64_t d = 0) {
    std::uint64_t s = 0x6a09e667f3bcc908ULL;
    for (std::uint64_t v : {a, b, c, d}) {
        s ^= v + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        splitmix64(s);
    }
    return s;
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    static Stream keyed(std::uint64_t seed, std::uint64_t a = 0,
                        std::uint64_t b = 0, std::uint64_t c = 0) {
        return Stream(mix(seed, a, b, c));
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        return next_u64() % n;  // bias negligible for n << 2^64
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Knuth's method; fine for the small rates used here.
    int poisson(double lambda) {
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    double exponential(double rate) {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return -std::log(u) / rate;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace retentia::rng
