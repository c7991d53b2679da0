#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace lego {

// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr uint64_t mix_seed(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> salts) {
  uint64_t s = mix_seed(base);
  for (uint64_t salt : salts) s = mix_seed(s ^ mix_seed(salt + 0x632BE59BD9B4E019ULL));
  return s;
}

// Thin wrapper so that every random draw in the library goes through one
// engine type with portable integer/real helpers.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  // Uniform real in [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean = 0.0, double stddev = 1.0);

  // k distinct values from [0, n), in draw order.
  std::vector<int> choose(int n, int k);
  std::vector<int> permutation(int n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lego
