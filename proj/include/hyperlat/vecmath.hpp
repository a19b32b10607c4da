#pragma once

#include <cmath>
#include <cstddef>

#include "common.hpp"

// Double-precision counterparts of the fused tape reductions, plus the small
// elementwise helpers shared by both scalar types.  Generic code calls these
// unqualified: the double overloads resolve by ordinary lookup, the Var
// overloads in hyperlat::ad by argument-dependent lookup.

namespace hyperlat {

inline double vdot_n(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double vdot(const Vec<double>& a, const Vec<double>& b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  return vdot_n(a.data(), b.data(), a.size());
}

inline double vsum(const Vec<double>& a) {
  double s = 0.0;
  for (double x : a) s += x;
  return s;
}

inline double vnorm(const Vec<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

inline Vec<double> mat_apply(const Matrix<double>& M, const Vec<double>& x) {
  if (M.cols != x.size()) throw DimensionError("mat_apply: size mismatch");
  Vec<double> out(M.rows);
  for (std::size_t i = 0; i < M.rows; ++i) out[i] = vdot_n(M.row(i), x.data(), M.cols);
  return out;
}

inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

inline double acosh_c(double x) { return x <= 1.0 ? 0.0 : std::acosh(x); }

// --- elementwise, shared by double and Var ----------------------------------
// Mixed operand types promote through the scalar operators (double op Var
// yields Var), so frozen tensors combine with tracked ones without copies.

template <class A, class B>
auto vadd(const Vec<A>& a, const Vec<B>& b) {
  if (a.size() != b.size()) throw DimensionError("add: size mismatch");
  Vec<decltype(a[0] + b[0])> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <class A, class B>
auto vsub(const Vec<A>& a, const Vec<B>& b) {
  if (a.size() != b.size()) throw DimensionError("sub: size mismatch");
  Vec<decltype(a[0] - b[0])> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <class S>
Vec<S> vneg(const Vec<S>& a) {
  Vec<S> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = -a[i];
  return out;
}

template <class T, class A>
auto vscale(const T& t, const Vec<A>& a) {
  Vec<decltype(t * a[0])> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = t * a[i];
  return out;
}

template <class S>
Vec<S> zeros_like(const Vec<S>& a) {
  return Vec<S>(a.size(), S(0.0));
}

}  // namespace hyperlat
