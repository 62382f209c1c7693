#include "gboed/rng.hpp"

#include <stdexcept>

namespace gboed {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t mix64(std::uint64_t x)
{
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed)
{
    std::uint64_t s = seed;
    for (auto& word : state_) {
        s += kGolden;
        word = mix64(s);
    }
}

Rng::result_type Rng::operator()()
{
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform01()
{
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Rng::normal() { return gauss_(*this); }

std::vector<Rng> Rng::split(std::size_t k)
{
    if (k == 0) {
        throw std::invalid_argument("Rng::split: k must be at least 1");
    }
    const std::uint64_t round = splits_++;
    std::vector<Rng> children;
    children.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        children.push_back(derive({0x5b1d'0000ULL, round, k, i}));
    }
    return children;
}

Rng Rng::derive(std::uint64_t key) const { return derive({key}); }

Rng Rng::derive(std::initializer_list<std::uint64_t> keys) const
{
    std::uint64_t h = mix64(seed_ ^ 0x243f6a8885a308d3ULL);
    for (std::uint64_t key : keys) {
        h = mix64(h ^ mix64(key + kGolden));
    }
    return Rng(h);
}

std::vector<Rng> split(Rng& rng, std::size_t k) { return rng.split(k); }

}  // namespace gboed
