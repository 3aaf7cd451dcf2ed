#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mpda {

/// Counter-based generator: each draw is a pure function of
/// (seed, stream, counter), so results do not depend on thread count or
/// evaluation order. Streams keep independent uses of one seed apart.
class CounterRng {
public:
    // Stream ids used by the synthetic-data generator.
    static constexpr std::uint64_t kFieldNoise = 0;
    static constexpr std::uint64_t kNodeSelection = 1;
    static constexpr std::uint64_t kObsNoise = 2;

    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() { return value(counter_++); }

    /// Uniform in (0, 1), endpoints excluded.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes two counters per pair.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    /// Integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t value(std::uint64_t counter) const {
        // splitmix64 finalizer over the mixed key
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (stream_ + 1) +
                          0xbf58476d1ce4e5b9ULL * (counter + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mpda
