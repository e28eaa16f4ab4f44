#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace evoaug {

/// 64-bit FNV-1a; stable across platforms, used to key RNG streams by text.
std::uint64_t fnv1a64(std::string_view text);

/// Seeded random stream.
///
/// Streams form a hierarchy: derive(key) returns a child whose seed is a
/// pure function of (this stream's seed, key) and does not depend on how
/// many values have been drawn from the parent. Everything random in the
/// engine flows from one root seed through derive().
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    RandomStream derive(std::uint64_t key) const;
    RandomStream derive(std::string_view key) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p);
    double normal(double mean, double stddev);

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace evoaug
