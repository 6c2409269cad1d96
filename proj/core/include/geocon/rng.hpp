#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace geocon {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derives independent, reproducible generator streams ("init", "dropout",
/// "shuffle", ...) from one 64-bit run seed.
class SeedSplitter {
 public:
  explicit SeedSplitter(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t derive(std::string_view stream) const noexcept;
  std::mt19937_64 stream(std::string_view name) const { return std::mt19937_64(derive(name)); }

 private:
  std::uint64_t seed_;
};

/// Mixes several integers into one seed (e.g. base seed, member, run).
std::uint64_t combine_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept;

}  // namespace geocon
