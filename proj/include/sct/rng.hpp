#pragma once

#include <cstdint>

namespace sct {

/// SplitMix64 finaliser; decorrelates nearby integers.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for the independent random stream number `counter` under `seed`.
/// Per-cell streams make parallel and serial simulation agree bit-exactly.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t counter) {
    return mix64(seed ^ mix64(counter));
}

} // namespace sct
