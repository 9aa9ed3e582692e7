#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "delta/common.hpp"

namespace delta {

// Deterministic PRNG: xoshiro256++ seeded via splitmix64. Both algorithms are
// published, portable bit-for-bit across platforms, and independent of any
// standard-library distribution implementation, so every draw in this project
// reproduces exactly from a 64-bit seed anywhere.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  std::uint64_t operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n) without modulo bias (rejection sampling).
  std::uint64_t below(std::uint64_t n) {
    check_contract(n > 0, "Rng::below requires n > 0");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = (*this)();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; the spare draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 handled with the
  // standard boost Gamma(a) = Gamma(a+1) * U^(1/a).
  double gamma(double shape) {
    check_contract(shape > 0.0, "Rng::gamma requires shape > 0");
    if (shape < 1.0) {
      double u = uniform();
      while (u <= 0.0) u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Dirichlet(concentration, ..., concentration) of given dimension.
  std::vector<double> dirichlet(std::size_t dim, double concentration) {
    check_contract(dim > 0, "Rng::dirichlet requires dim > 0");
    std::vector<double> q(dim);
    double total = 0.0;
    for (auto& v : q) {
      v = gamma(concentration);
      total += v;
    }
    if (total <= 0.0 || !std::isfinite(total))
      throw NumericError("degenerate Dirichlet draw (all components underflow)");
    for (auto& v : q) v /= total;
    return q;
  }

  // In-place Fisher-Yates shuffle; identical output on every platform.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(items[i], items[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t s_[4] = {};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stable derivation of sub-stream seeds (episode, stream, task, ...) from a
// user-facing seed, so independent components never share a draw sequence.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
  std::uint64_t x = base ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
  // One splitmix64 scramble decorrelates adjacent ids.
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace delta
