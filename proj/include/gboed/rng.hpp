#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace gboed {

/// Splittable pseudo-random stream (xoshiro256** core, SplitMix64 seeding).
///
/// A stream is single-owner. Parallel or independent work obtains its own
/// stream through split() or derive(); children are a pure function of the
/// parent seed and the derivation key, never of how many values the parent
/// has already produced.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()();

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01();
    double normal();

    std::uint64_t seed() const { return seed_; }

    /// k children keyed by (seed, number of earlier split calls, k, index).
    std::vector<Rng> split(std::size_t k);

    /// Child keyed only by (seed, key); does not touch this stream.
    Rng derive(std::uint64_t key) const;
    Rng derive(std::initializer_list<std::uint64_t> keys) const;

private:
    std::array<std::uint64_t, 4> state_{};
    std::uint64_t seed_ = 0;
    std::uint64_t splits_ = 0;
    std::normal_distribution<double> gauss_{};
};

/// Free-function form of Rng::split; throws std::invalid_argument when k == 0.
std::vector<Rng> split(Rng& rng, std::size_t k);

std::uint64_t mix64(std::uint64_t x);

}  // namespace gboed
