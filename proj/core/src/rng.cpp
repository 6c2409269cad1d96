#include "geocon/rng.hpp"

namespace geocon {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t SeedSplitter::derive(std::string_view stream) const noexcept {
  // FNV-1a over the stream name, then mixed with the run seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed_ ^ splitmix64(h));
}

std::uint64_t combine_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

}  // namespace geocon
