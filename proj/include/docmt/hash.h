#pragma once

#include <cstdint>
#include <string_view>

namespace docmt {

// FNV-1a, 64-bit. Used for config/input fingerprints and for the mock
// engines' deterministic pseudo-random scores; not cryptographic.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace docmt
