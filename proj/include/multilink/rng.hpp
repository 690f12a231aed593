#pragma once

#include <cstdint>

namespace multilink {

/// splitmix64 mix of a base seed and a stream index. Gives independent,
/// reproducible sub-seeds for restart chains, scenarios, and replications.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t x = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace multilink
