#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace ctrank {

/// Unbiased draw in [0, n) via rejection. std::uniform_int_distribution's
/// output sequence is implementation-defined; this one is pinned.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw std::logic_error("bounded_draw(rng, 0)");
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

}  // namespace ctrank
