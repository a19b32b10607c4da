#pragma once

// Trainable maps: Euclidean MLPs, the Mobius linear layer, and hyperbolic
// multinomial logistic regression on the Poincare ball.

#include <cstddef>
#include <vector>

#include "hyperlat/autodiff.hpp"
#include "hyperlat/common.hpp"
#include "hyperlat/geometry.hpp"
#include "hyperlat/rng.hpp"
#include "hyperlat/vecmath.hpp"

namespace hyperlat {
namespace nn {

// ---------------------------------------------------------------------------
// Euclidean MLP
// ---------------------------------------------------------------------------

template <class S>
struct Dense {
  Matrix<S> W;  // out x in
  Vec<S> b;     // out
};

template <class S>
struct Mlp {
  std::vector<Dense<S>> layers;
  double slope = 0.2;  // LeakyReLU slope between layers (not after the last)
};

template <class S>
Vec<S> affine(const Dense<S>& d, const Vec<S>& v) {
  if (v.size() != d.W.cols) {
    throw DimensionError("affine: input size " + std::to_string(v.size()) +
                         " does not match weight columns " + std::to_string(d.W.cols));
  }
  auto out = mat_apply(d.W, v);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] + d.b[i];
  return out;
}

template <class S>
Vec<S> mlp_forward(const Mlp<S>& m, const Vec<S>& v) {
  geom::KernelRegion<S> region(v, "nn/mlp");
  Vec<S> h = v;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    h = affine(m.layers[l], h);
    if (l + 1 < m.layers.size()) {
      for (auto& hi : h) hi = leaky_relu(hi, m.slope);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Mobius linear layer: x -> exp_0(M log_0(x)) (+) exp_0(bq)
// ---------------------------------------------------------------------------

// The bias lives on the ball but is parametrized by an unconstrained tangent
// vector bq at the origin, so every trainable parameter stays Euclidean.
template <class S>
struct MobiusLinear {
  Matrix<S> M;  // out x in
  Vec<S> bq;    // out, bias = exp_0(bq)
  geom::Ball ball;
  bool activation = false;  // optional exp_0(LeakyReLU(log_0(.)))
  double slope = 0.2;
};

template <class S>
Vec<S> mobius_linear(const MobiusLinear<S>& layer, const Vec<S>& x) {
  if (x.size() != layer.M.cols) {
    throw DimensionError("mobius_linear: input size " + std::to_string(x.size()) +
                         " does not match weight columns " + std::to_string(layer.M.cols));
  }
  if (layer.bq.size() != layer.M.rows) {
    throw DimensionError("mobius_linear: bias size does not match weight rows");
  }
  geom::KernelRegion<S> region(x, "nn/mobius_linear");
  const geom::Ball& B = layer.ball;
  auto h = geom::exp_map_origin(mat_apply(layer.M, geom::log_map_origin(x, B)), B);
  auto out = geom::mobius_add(h, geom::exp_map_origin(layer.bq, B), B);
  if (layer.activation) {
    auto t = geom::log_map_origin(out, B);
    for (auto& ti : t) ti = leaky_relu(ti, layer.slope);
    out = geom::exp_map_origin(t, B);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hyperbolic multinomial logistic regression
// ---------------------------------------------------------------------------

inline constexpr double kMlrNormalFloor = 1e-12;

// Prototypes are parametrized as p_k = exp_0(q_k) with unconstrained rows q_k;
// normals a_k are unconstrained rows read in the tangent space at p_k.
template <class S>
struct Mlr {
  Matrix<S> q;  // K x n
  Matrix<S> a;  // K x n
  geom::Ball ball;
};

template <class S>
Vec<S> prototype(const Mlr<S>& mlr, std::size_t k) {
  return geom::exp_map_origin(row_vec(mlr.q, k), mlr.ball);
}

template <class S>
Vec<S> mlr_logits(const Mlr<S>& mlr, const Vec<S>& x) {
  if (x.size() != mlr.q.cols) {
    throw DimensionError("mlr_logits: input size " + std::to_string(x.size()) +
                         " does not match prototype dimension " + std::to_string(mlr.q.cols));
  }
  geom::KernelRegion<S> region(x, "nn/mlr");
  const geom::Ball& B = mlr.ball;
  const double sc = B.sqrtc();
  const std::size_t K = mlr.q.rows;
  Vec<S> logits;
  logits.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto ak = row_vec(mlr.a, k);
    auto na = vnorm(ak);
    if (value_of(na) < kMlrNormalFloor) {
      throw DomainError("mlr_logits: degenerate normal for class " + std::to_string(k));
    }
    auto pk = prototype(mlr, k);
    auto d = geom::mobius_add(vneg(pk), x, B);
    auto lam = geom::conformal_factor(pk, B);
    auto arg = (S(2.0 * sc) * vdot(d, ak)) / ((S(1.0) - S(B.c) * vdot(d, d)) * na);
    logits.push_back(lam * na * S(1.0 / sc) * asinh(arg));
  }
  return logits;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

inline double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / double(fan_in + fan_out));
}

inline Dense<double> init_dense(std::size_t out, std::size_t in, rng::Stream& s) {
  Dense<double> d;
  d.W = Matrix<double>(out, in);
  double bound = xavier_bound(in, out);
  for (auto& w : d.W.a) w = s.uniform(-bound, bound);
  d.b.assign(out, 0.0);
  return d;
}

// dims = {in, hidden..., out}
inline Mlp<double> init_mlp(const std::vector<std::size_t>& dims, rng::Stream& s,
                            double slope = 0.2) {
  if (dims.size() < 2) throw DimensionError("init_mlp: need at least input and output dims");
  Mlp<double> m;
  m.slope = slope;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    m.layers.push_back(init_dense(dims[l + 1], dims[l], s));
  }
  return m;
}

inline MobiusLinear<double> init_mobius_linear(std::size_t out, std::size_t in,
                                               const geom::Ball& ball, rng::Stream& s) {
  MobiusLinear<double> layer;
  layer.ball = ball;
  layer.M = Matrix<double>(out, in);
  double bound = xavier_bound(in, out);
  for (auto& w : layer.M.a) w = s.uniform(-bound, bound);
  // small tangent bias keeps the layer near the well-conditioned region
  layer.bq.resize(out);
  for (auto& b : layer.bq) b = 0.1 * s.normal();
  return layer;
}

inline Mlr<double> init_mlr(std::size_t K, std::size_t n, const geom::Ball& ball, rng::Stream& s) {
  if (K < 2) throw DimensionError("init_mlr: need at least two classes");
  Mlr<double> mlr;
  mlr.ball = ball;
  mlr.q = Matrix<double>(K, n);
  mlr.a = Matrix<double>(K, n);
  for (auto& v : mlr.q.a) v = 0.1 * s.normal();
  for (auto& v : mlr.a.a) v = s.normal();
  return mlr;
}

}  // namespace nn
}  // namespace hyperlat
