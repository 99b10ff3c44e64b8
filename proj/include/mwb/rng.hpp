#pragma once

#include <cstdint>
#include <initializer_list>

namespace mwb {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed of an independent substream, e.g. (seed, prefecture, month).
inline std::uint64_t substream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = splitmix64(seed);
    for (auto id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

}  // namespace mwb
