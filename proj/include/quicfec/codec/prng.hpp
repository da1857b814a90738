#pragma once

#include <cstdint>

namespace quicfec::codec {

// Park & Miller "minimal standard" Lehmer generator: x' = 16807 x mod (2^31 - 1).
struct PrngState {
  std::uint32_t x = 1;  // in [1, 2^31 - 2]
};

inline constexpr std::uint32_t kParkMillerModulus = 2147483647u;
inline constexpr std::uint32_t kParkMillerMultiplier = 16807u;

inline constexpr std::uint32_t prng_next(PrngState& state) {
  const std::uint64_t product = static_cast<std::uint64_t>(state.x) * kParkMillerMultiplier;
  state.x = static_cast<std::uint32_t>(product % kParkMillerModulus);
  return state.x;
}

// A zero seed would lock the generator at zero, so it maps to 1.
inline constexpr PrngState seed_prng_16(std::uint16_t seed) { return PrngState{seed == 0 ? 1u : seed}; }

}  // namespace quicfec::codec
