#pragma once

#include <cstdint>
#include <random>

namespace docmt {

// Deterministic 64-bit-seeded generator. mt19937_64 output is fully specified
// by the standard, and the bounded draw below is a fixed rule (modulo, no
// rejection), so a given seed produces the same draw sequence on every
// platform. Anything that needs to replay a sampler run byte-for-byte must
// consume draws through this class only.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform over [lo, hi], inclusive. Requires lo <= hi.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    return lo + next_u64() % (hi - lo + 1);
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace docmt
