#pragma once

#include <cstdint>
#include <random>

namespace graphmem {

// splitmix64; used to derive independent substream seeds from a run seed.
inline uint64_t mix_seed(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(uint64_t seed, uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed ^ mix_seed(stream)));
}

}  // namespace graphmem
