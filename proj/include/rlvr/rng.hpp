#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace rlvr {

// All randomness flows through splitmix64-derived seeds and the explicit
// transforms below. std::random distributions are implementation-defined,
// which would break byte-identical reruns, so we never use them.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a) { return splitmix64(a); }

// Order-sensitive combination of stream labels, e.g. (seed, step, task, rollout).
template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t a, Rest... rest) {
  return splitmix64(a + 0x9e3779b97f4a7c15ULL * (1 + mix_seed(rest...)));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Exponential(rate 1); finite because uniform01() < 1.
  double exponential() { return -std::log1p(-uniform01()); }

  // Standard normal via Box-Muller (sine branch discarded).
  double normal() {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return v % n;
  }

  // Index sampled from an (already normalized) probability vector.
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform01();
    double c = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      c += probs[i];
      if (u < c) return i;
    }
    return probs.empty() ? 0 : probs.size() - 1;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace rlvr
