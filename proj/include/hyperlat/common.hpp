#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hyperlat {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

template <class S>
using Vec = std::vector<S>;

template <class S>
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<S> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}

  S& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  S* row(std::size_t i) { return a.data() + i * cols; }
  const S* row(std::size_t i) const { return a.data() + i * cols; }
  std::size_t numel() const { return rows * cols; }
};

template <class S>
Vec<S> row_vec(const Matrix<S>& m, std::size_t i) {
  return Vec<S>(m.row(i), m.row(i) + m.cols);
}

// 17 significant digits: a double written this way reads back bit-identical.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double value_of(double x) { return x; }

}  // namespace hyperlat
