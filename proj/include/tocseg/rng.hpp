#pragma once

#include <cstdint>

namespace tocseg {

// SplitMix64 finalizer (Vigna). Used as a counter-based generator: feeding a
// (seed, counter) pair through two rounds yields the same stream on every
// platform and regardless of thread scheduling.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Draw for iteration `it`, position `j` of a seeded counter-based stream.
inline std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t it, std::uint64_t j) {
    return splitmix64(splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (it + 1))) ^ (j + 1));
}

} // namespace tocseg
