#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace eqgrad {

// Counter-based generator: the k-th draw of stream s under seed q is a pure
// function of (q, s, k), so results do not depend on the standard library.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : key_(mix(seed) ^ mix(stream + 0x632be59bd9b4e019ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // uniform on [0, 1) with 53 random bits
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  int integer(int lo, int hi) {  // inclusive
    auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>((*this)() % span);
  }

  Rng fork(std::uint64_t stream) const { return Rng(key_, stream); }
  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace eqgrad
