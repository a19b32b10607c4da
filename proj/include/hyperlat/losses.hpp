#pragma once

// The four-term training objective: Euclidean reconstruction, a frozen
// nonlinear perceptual proxy, latent round-trip, and hyperbolic NLL.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "hyperlat/autodiff.hpp"
#include "hyperlat/common.hpp"
#include "hyperlat/rng.hpp"
#include "hyperlat/vecmath.hpp"

namespace hyperlat {
namespace loss {

struct Weights {
  double lambda1 = 1.0;  // perceptual proxy
  double lambda2 = 0.5;  // latent round trip
  double lambda3 = 0.3;  // hyperbolic NLL
};

// Optional schedule: lambda2 tracks the round-trip term, clamped to [0.3, 0.6].
// Applied to the term as a constant (no gradient flows through the schedule).
inline double dynamic_lambda2(double rec_value) {
  double v = 0.6 * std::min(1.0, rec_value / 0.3);
  return std::clamp(v, 0.3, 0.6);
}

template <class S>
struct Breakdown {
  S l2{0.0};
  S perceptual{0.0};
  S latent_rec{0.0};
  S hyper{0.0};
  S total{0.0};
  double lambda2_used = 0.0;
};

// ---------------------------------------------------------------------------
// Classification term
// ---------------------------------------------------------------------------

template <class S>
S nll_single(const Vec<S>& logits, std::size_t label) {
  using std::exp;
  using std::log;
  if (logits.empty()) throw DomainError("nll: empty logit vector");
  if (label >= logits.size()) throw DomainError("nll: label out of range");
  double m = value_of(logits[0]);
  for (auto& l : logits) m = std::max(m, value_of(l));
  Vec<S> shifted;
  shifted.reserve(logits.size());
  for (auto& l : logits) shifted.push_back(exp(l - S(m)));
  return log(vsum(shifted)) + S(m) - logits[label];
}

template <class S>
S nll_loss(const std::vector<Vec<S>>& logits, const std::vector<std::size_t>& labels) {
  if (logits.empty()) throw DomainError("nll_loss: empty batch");
  if (logits.size() != labels.size()) {
    throw DimensionError("nll_loss: batch size does not match label count");
  }
  S acc{0.0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    acc = acc + nll_single(logits[i], labels[i]);
  }
  return acc * S(1.0 / double(logits.size()));
}

// ---------------------------------------------------------------------------
// Norm-based terms
// ---------------------------------------------------------------------------

template <class A, class B>
auto pair_norm(const Vec<A>& x, const Vec<B>& ref) {
  if (x.size() != ref.size()) throw DimensionError("loss: vector size mismatch");
  return vnorm(vsub(x, ref));
}

template <class A, class B>
auto l2_loss(const std::vector<Vec<A>>& x, const std::vector<Vec<B>>& xhat) {
  using R = decltype(pair_norm(x[0], xhat[0]));
  if (x.empty()) throw DomainError("l2_loss: empty batch");
  if (x.size() != xhat.size()) throw DimensionError("l2_loss: batch size mismatch");
  R acc{0.0};
  for (std::size_t i = 0; i < x.size(); ++i) acc = acc + pair_norm(x[i], xhat[i]);
  return acc * R(1.0 / double(x.size()));
}

// Frozen random feature map standing in for a perceptual network.
struct Probe {
  Matrix<double> P;
  bool nonlinear = true;
  double slope = 0.2;
};

inline Probe init_probe(std::size_t out, std::size_t in, rng::Stream& s) {
  Probe p;
  p.P = Matrix<double>(out, in);
  double scale = 1.0 / std::sqrt(double(in));
  for (auto& w : p.P.a) w = scale * s.normal();
  return p;
}

template <class S>
Vec<S> probe_features(const Probe& probe, const Vec<S>& x) {
  if (x.size() != probe.P.cols) throw DimensionError("probe: input size mismatch");
  auto f = mat_apply(probe.P, x);
  if (probe.nonlinear) {
    for (auto& fi : f) fi = leaky_relu(fi, probe.slope);
  }
  return f;
}

template <class A, class B>
auto perceptual_proxy_loss(const Probe& probe, const std::vector<Vec<A>>& x,
                           const std::vector<Vec<B>>& xhat) {
  using R = decltype(pair_norm(probe_features(probe, x[0]), probe_features(probe, xhat[0])));
  if (x.empty()) throw DomainError("perceptual_proxy_loss: empty batch");
  if (x.size() != xhat.size()) throw DimensionError("perceptual_proxy_loss: batch size mismatch");
  R acc{0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc = acc + pair_norm(probe_features(probe, x[i]), probe_features(probe, xhat[i]));
  }
  return acc * R(1.0 / double(x.size()));
}

template <class A, class B>
auto latent_rec_loss(const std::vector<Vec<A>>& w, const std::vector<Vec<B>>& wprime) {
  using R = decltype(pair_norm(w[0], wprime[0]));
  if (w.empty()) throw DomainError("latent_rec_loss: empty batch");
  if (w.size() != wprime.size()) throw DimensionError("latent_rec_loss: batch size mismatch");
  R acc{0.0};
  for (std::size_t i = 0; i < w.size(); ++i) acc = acc + pair_norm(w[i], wprime[i]);
  return acc * R(1.0 / double(w.size()));
}

// ---------------------------------------------------------------------------
// Weighted total
// ---------------------------------------------------------------------------

template <class S>
Breakdown<S> total_loss(S l2, S perceptual, S latent_rec, S hyper, const Weights& w,
                        bool lambda2_is_dynamic = false) {
  Breakdown<S> b;
  b.l2 = l2;
  b.perceptual = perceptual;
  b.latent_rec = latent_rec;
  b.hyper = hyper;
  b.lambda2_used = lambda2_is_dynamic ? dynamic_lambda2(value_of(latent_rec)) : w.lambda2;
  b.total = l2 + S(w.lambda1) * perceptual + S(b.lambda2_used) * latent_rec +
            S(w.lambda3) * hyper;
  return b;
}

}  // namespace loss
}  // namespace hyperlat
