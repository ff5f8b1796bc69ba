#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace phishlens {

// Deterministic uniform draw in [0, 1) from a 64-bit generator output.
// mt19937_64's output sequence is specified by the standard, so results are
// identical across platforms.
inline double uniform_unit(std::uint64_t raw) {
    return static_cast<double>(raw >> 11) * 0x1.0p-53;
}

// splitmix64 finalizer; decorrelates seed streams derived from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Portable Fisher-Yates; std::shuffle output differs between standard
// library implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace phishlens
