#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace singmis {

/* Counter-based randomness.  Every consumer opens its own stream keyed by
 * (seed, agent, round, ...), so draws are reproducible and independent of
 * the order in which the simulation visits agents. */

constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng() = default;
    CounterRng(std::initializer_list<std::uint64_t> keys) {
        for (auto k : keys) state_ = mix64(state_ ^ mix64(k));
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

    std::uint64_t operator()() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // true with probability p
    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return static_cast<double>((*this)()) < p * 18446744073709551616.0;
    }

    // uniform in [0, n)
    std::uint64_t below(std::uint64_t n) { return (*this)() % n; }

    // uniform in [lo, hi] inclusive
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_ = 0;
};

}  // namespace singmis
