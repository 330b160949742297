#ifndef LOGICCAR_RNG_HPP_
#define LOGICCAR_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace logiccar {

using Rng = std::mt19937_64;

// Independent, reproducible substream of `seed` identified by `name`.
inline Rng named_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
  std::uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return Rng(z);
}

}  // namespace logiccar

#endif  // LOGICCAR_RNG_HPP_
