#pragma once

#include <cstdint>
#include <random>

namespace psmrwm {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; used to derive decorrelated per-cell seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for grid cell `index` of an experiment seeded with `base`.
constexpr std::uint64_t cell_seed(std::uint64_t base, std::uint64_t index) {
  return base ^ mix_seed(index);
}

}  // namespace psmrwm
