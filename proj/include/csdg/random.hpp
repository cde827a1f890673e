#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

namespace csdg {

// splitmix64 finalizer; used to fan a master seed out into stage seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// seed_for(master, stage) = mix64(master ^ mix64(stage)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stage) {
  return mix64(master ^ mix64(stage));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(engine_);
  }
  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace csdg
