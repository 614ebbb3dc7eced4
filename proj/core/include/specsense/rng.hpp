#ifndef SPECSENSE_RNG_HPP
#define SPECSENSE_RNG_HPP

#include <cstdint>
#include <random>

namespace specsense {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; decorrelates derived seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent seed from (base, stream index). Used to split one
/// master seed into per-stage and per-timeslot streams so that parallel and
/// serial evaluation orders produce identical results.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(base ^ mix_seed(stream));
}

}  // namespace specsense

#endif
