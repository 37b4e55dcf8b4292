#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fairtext {

// FNV-1a, used for content digests and for deriving per-instance RNG seeds.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex16(std::uint64_t value);

}  // namespace fairtext
