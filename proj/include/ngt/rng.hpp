// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random streams. All draw logic is self-contained (no
// std::*_distribution, whose output is implementation-defined), so the same
// seed produces the same bytes on every standard library.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ngt {

// splitmix64 finalizer; used to derive independent stream seeds.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// FNV-1a over the tag string, so streams are named rather than numbered.
inline uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Stream derived from (seed, purpose tag [, index]).  Distinct tags give
  // independent streams, e.g. "init.host", "init.gate", "dropout".
  static Rng stream(uint64_t seed, std::string_view tag) {
    return Rng(mix64(seed ^ hash_tag(tag)));
  }
  static Rng stream(uint64_t seed, std::string_view tag, uint64_t index) {
    return Rng(mix64(mix64(seed ^ hash_tag(tag)) + index));
  }

  uint64_t u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Box-Muller; consumes exactly two engine draws per sample.
  double normal(double mean, double stddev) {
    double u1 = 1.0 - uniform01();  // (0, 1], safe for log
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  int64_t below(int64_t n) {
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
  }

 private:
  std::mt19937_64 eng_;
};

// In-place Fisher-Yates shuffle.
template <class T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
    int64_t j = rng.below(i + 1);
    std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
  }
}

}  // namespace ngt
