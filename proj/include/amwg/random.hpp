#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace amwg {

using Rng = std::mt19937_64;

// Independent, reproducible stream for (seed, tags...).
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq full(words.begin(), words.end());
  return Rng(full);
}

}  // namespace amwg
