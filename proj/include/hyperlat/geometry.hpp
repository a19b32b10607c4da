#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "autodiff.hpp"
#include "common.hpp"
#include "vecmath.hpp"

// Poincare ball primitives.  The kernels are generic over the scalar type so
// the same formulas run in plain doubles and on an autodiff tape; the typed
// wrappers at the bottom add dimension/curvature checking and are the
// double-precision public surface.

namespace hyperlat::geom {

// Norms below this carry no usable direction and are treated as zero.
inline constexpr double kDirectionFloor = 1e-15;

struct Ball {
  double c = 1.0;     // curvature magnitude, > 0
  double eps = 4e-3;  // boundary clamp width

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("curvature must be finite and > 0");
    if (!(eps > 0.0) || !(eps < 1.0)) throw DomainError("boundary eps must lie in (0, 1)");
  }
  double sqrtc() const { return std::sqrt(c); }
  // largest representable Euclidean norm after clamping
  double max_norm() const { return (1.0 - eps) / sqrtc(); }
  // hyperbolic radius of the clamp sphere: (2/sqrt(c)) * artanh(1 - eps)
  double max_radius() const { return 2.0 / sqrtc() * std::atanh(1.0 - eps); }

  friend bool operator==(const Ball&, const Ball&) = default;
};

// Diagnostic region label for tape-carrying scalars; no-op for doubles.
template <class S>
struct KernelRegion {
  KernelRegion(const Vec<S>&, const char*) {}
};

template <>
struct KernelRegion<ad::Var> {
  ad::Tape::Region region;
  KernelRegion(const Vec<ad::Var>& v, const char* name)
      : region(ad::detail::tape_in(v.data(), v.size()), name) {}
};

// --- kernels ----------------------------------------------------------------

template <class S>
S conformal_factor(const Vec<S>& x, const Ball& B) {
  return S(2.0) / (S(1.0) - S(B.c) * vdot(x, x));
}

template <class S>
Vec<S> project_to_ball(Vec<S> x, const Ball& B) {
  S n = vnorm(x);
  if (value_of(n) * B.sqrtc() > 1.0 - B.eps) {
    S s = S(B.max_norm()) / n;
    for (auto& xi : x) xi = xi * s;
  }
  return x;
}

namespace detail {
inline bool exact_negation(const Vec<double>& x, const Vec<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] != -x[i]) return false;
  return true;
}
}  // namespace detail

template <class S>
Vec<S> mobius_add(const Vec<S>& x, const Vec<S>& y, const Ball& B) {
  if (x.size() != y.size()) throw DimensionError("mobius_add: size mismatch");
  KernelRegion<S> region(x, "mobius_add");
  if constexpr (std::is_same_v<S, double>) {
    // (-x) o+ x = 0 holds exactly in the gyrogroup; honor it bitwise.
    if (detail::exact_negation(x, y)) return Vec<S>(x.size(), 0.0);
  }
  S xy = vdot(x, y);
  S nx = vdot(x, x);
  S ny = vdot(y, y);
  S cx = S(1.0) + S(2.0 * B.c) * xy + S(B.c) * ny;  // coefficient on x
  S cy = S(1.0) - S(B.c) * nx;                      // coefficient on y
  S den = S(1.0) + S(2.0 * B.c) * xy + S(B.c * B.c) * nx * ny;
  Vec<S> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (cx * x[i] + cy * y[i]) / den;
  return project_to_ball(std::move(out), B);
}

template <class S>
Vec<S> mobius_scalar_mul(const S& t, const Vec<S>& x, const Ball& B) {
  using std::atanh;
  using std::tanh;
  KernelRegion<S> region(x, "mobius_scalar_mul");
  S n = vnorm(x);
  if (value_of(n) < kDirectionFloor) return Vec<S>(x.size(), S(0.0));
  S sn = S(B.sqrtc()) * n;
  S factor = tanh(t * atanh(sn)) / sn;
  Vec<S> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  return project_to_ball(std::move(out), B);
}

template <class S>
Vec<S> exp_map_origin(const Vec<S>& v, const Ball& B) {
  using std::tanh;
  KernelRegion<S> region(v, "exp_map");
  S n = vnorm(v);
  if (value_of(n) < kDirectionFloor) return v;  // limit factor tanh(r)/r -> 1
  S factor = tanh(S(B.sqrtc()) * n) / (S(B.sqrtc()) * n);
  Vec<S> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = factor * v[i];
  return project_to_ball(std::move(out), B);
}

template <class S>
Vec<S> exp_map(const Vec<S>& base, const Vec<S>& v, const Ball& B) {
  using std::tanh;
  if (base.size() != v.size()) throw DimensionError("exp_map: size mismatch");
  KernelRegion<S> region(base, "exp_map");
  S n = vnorm(v);
  if (value_of(n) < kDirectionFloor) return base;
  S lam = conformal_factor(base, B);
  S factor = tanh(S(B.sqrtc()) * lam * n / S(2.0)) / (S(B.sqrtc()) * n);
  Vec<S> step(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) step[i] = factor * v[i];
  return mobius_add(base, step, B);
}

template <class S>
Vec<S> log_map_origin(const Vec<S>& y, const Ball& B) {
  using std::atanh;
  KernelRegion<S> region(y, "log_map");
  S n = vnorm(y);
  if (value_of(n) < kDirectionFloor) return y;  // limit factor atanh(r)/r -> 1
  S factor = atanh(S(B.sqrtc()) * n) / (S(B.sqrtc()) * n);
  Vec<S> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = factor * y[i];
  return out;
}

template <class S>
Vec<S> log_map(const Vec<S>& base, const Vec<S>& y, const Ball& B) {
  using std::atanh;
  if (base.size() != y.size()) throw DimensionError("log_map: size mismatch");
  KernelRegion<S> region(base, "log_map");
  Vec<S> d = mobius_add(vneg(base), y, B);
  S n = vnorm(d);
  if (value_of(n) < kDirectionFloor) return Vec<S>(y.size(), S(0.0));
  S lam = conformal_factor(base, B);
  S factor = S(2.0) / (S(B.sqrtc()) * lam) * atanh(S(B.sqrtc()) * n) / n;
  Vec<S> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = factor * d[i];
  return out;
}

// Metric form of the distance; agrees with distance_gyro to rounding error.
template <class S>
S distance(const Vec<S>& x, const Vec<S>& y, const Ball& B) {
  if (x.size() != y.size()) throw DimensionError("distance: size mismatch");
  KernelRegion<S> region(x, "distance");
  Vec<S> d = vsub(x, y);
  S dd = vdot(d, d);
  S den = (S(1.0) - S(B.c) * vdot(x, x)) * (S(1.0) - S(B.c) * vdot(y, y));
  S arg = S(1.0) + S(2.0 * B.c) * dd / den;
  return acosh_c(arg) / S(B.sqrtc());
}

// Gyro form: (2/sqrt(c)) * artanh(sqrt(c) * ||(-x) o+ y||).
template <class S>
S distance_gyro(const Vec<S>& x, const Vec<S>& y, const Ball& B) {
  using std::atanh;
  KernelRegion<S> region(x, "distance");
  S n = vnorm(mobius_add(vneg(x), y, B));
  return S(2.0 / B.sqrtc()) * atanh(S(B.sqrtc()) * n);
}

template <class S>
S radius_of(const Vec<S>& x, const Ball& B) {
  using std::atanh;
  return S(2.0 / B.sqrtc()) * atanh(S(B.sqrtc()) * vnorm(x));
}

template <class S>
Vec<S> geodesic_point(const Vec<S>& x, const Vec<S>& y, const S& t, const Ball& B) {
  // The chord gyrovector (-x) o+ y carries up to twice the clamp radius when
  // both ends hug the boundary, so the inner algebra runs with a loose clamp;
  // the blended point lies between x and y and lands back inside B's clamp.
  Ball inner{B.c, std::min(B.eps, 1e-12)};
  return project_to_ball(
      mobius_add(x, mobius_scalar_mul(t, mobius_add(vneg(x), y, inner), inner), inner), B);
}

template <class S>
Vec<S> rescale_to_radius(const Vec<S>& x, const S& r, const Ball& B) {
  S cur = radius_of(x, B);
  if (value_of(cur) < kDirectionFloor)
    throw DomainError("rescale_to_radius: point at origin has no direction");
  return mobius_scalar_mul(r / cur, x, B);
}

// --- typed double-precision layer -------------------------------------------

struct Point {
  Vec<double> x;
  Ball ball;

  static Point origin(std::size_t dim, const Ball& B) {
    B.validate();
    return Point{Vec<double>(dim, 0.0), B};
  }

  // Projects into the closed clamp region; rejects non-finite input.
  static Point from(Vec<double> raw, const Ball& B) {
    B.validate();
    if (!all_finite(raw)) throw DomainError("point has non-finite coordinates");
    return Point{project_to_ball(std::move(raw), B), B};
  }

  std::size_t dim() const { return x.size(); }
};

struct Tangent {
  Vec<double> v;
  Point base;
};

struct Radius {
  double value = 0.0;
};

namespace detail {
inline void check_pair(const Point& a, const Point& b, const char* op) {
  if (a.dim() != b.dim())
    throw DimensionError(std::string(op) + ": dimension mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
  if (!(a.ball == b.ball)) throw DimensionError(std::string(op) + ": ball mismatch");
}
}  // namespace detail

inline double conformal_factor(const Point& p) { return conformal_factor(p.x, p.ball); }

inline Point mobius_add(const Point& a, const Point& b) {
  detail::check_pair(a, b, "mobius_add");
  return Point{mobius_add(a.x, b.x, a.ball), a.ball};
}

inline Point mobius_scalar_mul(double t, const Point& p) {
  if (t == 1.0) return p;  // exact identity
  return Point{mobius_scalar_mul(t, p.x, p.ball), p.ball};
}

inline Point exp_map(const Point& base, const Tangent& t) {
  detail::check_pair(base, t.base, "exp_map");
  return Point{exp_map(base.x, t.v, base.ball), base.ball};
}

inline Tangent log_map(const Point& base, const Point& y) {
  detail::check_pair(base, y, "log_map");
  return Tangent{log_map(base.x, y.x, base.ball), base};
}

inline double distance(const Point& a, const Point& b) {
  detail::check_pair(a, b, "distance");
  return distance(a.x, b.x, a.ball);
}

inline Radius radius(const Point& p) { return Radius{radius_of(p.x, p.ball)}; }

inline Point geodesic(const Point& a, const Point& b, double t, bool extrapolate = false) {
  detail::check_pair(a, b, "geodesic");
  if (!extrapolate && (t < 0.0 || t > 1.0))
    throw DomainError("geodesic: t outside [0, 1] (pass extrapolate to allow)");
  if (t == 0.0) return a;  // endpoints are exact
  if (t == 1.0) return b;
  return Point{geodesic_point(a.x, b.x, t, a.ball), a.ball};
}

inline Point rescale_to_radius(const Point& p, Radius r) {
  if (r.value < 0.0) throw DomainError("rescale_to_radius: negative radius");
  double cur = radius_of(p.x, p.ball);
  if (cur < kDirectionFloor)
    throw DomainError("rescale_to_radius: point at origin has no direction");
  double t = r.value / cur;
  return mobius_scalar_mul(t, p);
}

}  // namespace hyperlat::geom
