#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace hyperlat::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed for a named substream under one master seed.  Components drawing from
// distinct tags are independent and may be generated in any order.
inline std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ fnv1a64(tag));
}

// mt19937_64 with explicit double conversions so results do not depend on
// library distribution internals.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  double uniform() { return double(bits() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    // Box-Muller, cosine branch only; u1 in (0, 1] keeps the log finite.
    double u1 = (double(bits() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::size_t index(std::size_t n) {
    // rejection below the threshold removes modulo bias
    std::uint64_t un = n;
    std::uint64_t threshold = (-un) % un;
    for (;;) {
      std::uint64_t r = bits();
      if (r >= threshold) return std::size_t(r % un);
    }
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  std::vector<double> normals(std::size_t n) {
    std::vector<double> out(n);
    for (auto& x : out) x = normal();
    return out;
  }

  std::vector<double> unit_vector(std::size_t n) {
    std::vector<double> v = normals(n);
    double s = 0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    if (s < 1e-12) throw NumericError("degenerate unit vector draw");
    for (auto& x : v) x /= s;
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

inline Stream substream(std::uint64_t seed, std::string_view tag) {
  return Stream(derive(seed, tag));
}

}  // namespace hyperlat::rng
