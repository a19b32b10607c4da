#pragma once

// End-to-end pipeline: frozen affine backbone (stand-in for a pretrained
// encoder), trainable Euclidean/hyperbolic stack, frozen pseudo-inverse
// generator, and the batch training objective.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperlat/common.hpp"
#include "hyperlat/geometry.hpp"
#include "hyperlat/layers.hpp"
#include "hyperlat/losses.hpp"
#include "hyperlat/params.hpp"
#include "hyperlat/rng.hpp"

namespace hyperlat {
namespace model {

struct Dims {
  std::size_t D = 64;    // sample features
  std::size_t d_w = 48;  // backbone latent
  std::size_t d_z = 16;  // Euclidean code before the ball
  std::size_t n = 16;    // ball dimension
  std::vector<std::size_t> enc_hidden{48, 32};
  std::vector<std::size_t> dec_hidden{32, 48};
  std::size_t probe_dim = 32;
  std::size_t K = 12;  // seen classes
};

// ---------------------------------------------------------------------------
// Frozen affine stand-ins
// ---------------------------------------------------------------------------

struct FrozenBackbone {
  Matrix<double> W;  // d_w x D, full row rank
  Vec<double> b;     // d_w
};

struct FrozenGenerator {
  Matrix<double> Winv;  // D x d_w, Moore-Penrose pseudo-inverse of W
  Vec<double> b;        // copy of the backbone bias
};

namespace detail {

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
inline Matrix<double> cholesky(const Matrix<double>& A) {
  const std::size_t n = A.rows;
  Matrix<double> L(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (s <= 1e-12) throw NumericError("cholesky: matrix not positive definite");
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return L;
}

// Solve (L L^T) x = rhs in place.
inline void chol_solve(const Matrix<double>& L, Vec<double>& x) {
  const std::size_t n = L.rows;
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * x[k];
    x[i] = s / L(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x[k];
    x[ii] = s / L(ii, ii);
  }
}

}  // namespace detail

inline FrozenBackbone make_backbone(const Dims& d, rng::Stream& s, double sigma_b) {
  FrozenBackbone bb;
  bb.W = Matrix<double>(d.d_w, d.D);
  double scale = 1.0 / std::sqrt(double(d.D));
  for (auto& w : bb.W.a) w = scale * s.normal();
  bb.b.resize(d.d_w);
  for (auto& bi : bb.b) bi = sigma_b * s.normal();
  return bb;
}

// Right pseudo-inverse W^T (W W^T)^{-1}; doubles as the full-row-rank check.
inline FrozenGenerator make_generator(const FrozenBackbone& bb) {
  const std::size_t r = bb.W.rows, c = bb.W.cols;
  Matrix<double> G(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k) s += bb.W(i, k) * bb.W(j, k);
      G(i, j) = G(j, i) = s;
    }
  }
  Matrix<double> L = detail::cholesky(G);

  FrozenGenerator gen;
  gen.b = bb.b;
  gen.Winv = Matrix<double>(c, r);
  Vec<double> col(r);
  for (std::size_t j = 0; j < r; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    detail::chol_solve(L, col);  // col = (W W^T)^{-1} e_j
    for (std::size_t i = 0; i < c; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < r; ++k) s += bb.W(k, i) * col[k];
      gen.Winv(i, j) = s;
    }
  }

  // W Winv must reproduce the identity on the latent space
  double worst = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k) s += bb.W(i, k) * gen.Winv(k, j);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  if (worst > 1e-8) throw NumericError("make_generator: backbone is not full row rank");
  return gen;
}

inline Vec<double> backbone_apply(const FrozenBackbone& bb, const Vec<double>& x) {
  if (x.size() != bb.W.cols) throw DimensionError("backbone: input size mismatch");
  auto w = mat_apply(bb.W, x);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += bb.b[i];
  return w;
}

template <class S>
Vec<S> generator_apply(const FrozenGenerator& gen, const Vec<S>& wprime) {
  if (wprime.size() != gen.Winv.cols) throw DimensionError("generator: input size mismatch");
  return mat_apply(gen.Winv, vsub(wprime, gen.b));
}

// ---------------------------------------------------------------------------
// Model container
// ---------------------------------------------------------------------------

struct Frozen {
  FrozenBackbone backbone;
  FrozenGenerator generator;
  loss::Probe probe;
};

struct HaeModel {
  Dims dims;
  geom::Ball ball;
  Frozen frozen;
  ParamSet params;
  std::uint64_t seed = 0;
  double sigma_b = 1.5;
};

inline std::vector<std::size_t> chain(std::size_t first, const std::vector<std::size_t>& mid,
                                      std::size_t last) {
  std::vector<std::size_t> out{first};
  out.insert(out.end(), mid.begin(), mid.end());
  out.push_back(last);
  return out;
}

inline void pack_mlp(const std::string& prefix, const nn::Mlp<double>& mlp, ParamSet& p) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    p.add(prefix + ".W" + std::to_string(l), tensor_from(mlp.layers[l].W));
    p.add(prefix + ".b" + std::to_string(l), tensor_from(mlp.layers[l].b));
  }
}

inline ParamSet init_params(const Dims& d, const geom::Ball& ball, std::uint64_t seed,
                            double hyper_gain = 1.5) {
  ParamSet p;
  {
    auto s = rng::substream(seed, "init/encoder");
    pack_mlp("encoder", nn::init_mlp(chain(d.d_w, d.enc_hidden, d.d_z), s), p);
  }
  {
    auto s = rng::substream(seed, "init/decoder");
    pack_mlp("decoder", nn::init_mlp(chain(d.n, d.dec_hidden, d.d_w), s), p);
  }
  {
    auto s = rng::substream(seed, "init/hyper");
    auto mob = nn::init_mobius_linear(d.n, d.d_z, ball, s);
    // A wider hyperbolic layer pushes initial instance embeddings out to the
    // radius clamp; training keeps them there, which is what gives the radius
    // ladder (instances outside, class midpoints inside) its contrast.
    for (auto& v : mob.M.a) v *= hyper_gain;
    p.add("hyper.M", tensor_from(mob.M));
    p.add("hyper.bq", tensor_from(mob.bq));
  }
  {
    auto s = rng::substream(seed, "init/mlr");
    auto mlr = nn::init_mlr(d.K, d.n, ball, s);
    p.add("mlr.q", tensor_from(mlr.q));
    p.add("mlr.a", tensor_from(mlr.a));
  }
  return p;
}

struct CreateOptions {
  double sigma_b = 1.5;      // frozen-backbone bias scale (uncentered latent space)
  double hyper_gain = 1.5;   // hyperbolic-layer init scale (boundary-saturated start)
};

inline HaeModel create(const Dims& dims, const geom::Ball& ball, std::uint64_t seed,
                       const CreateOptions& opt = {}) {
  HaeModel m;
  m.dims = dims;
  m.ball = ball;
  m.seed = seed;
  m.sigma_b = opt.sigma_b;
  auto sb = rng::substream(seed, "frozen/backbone");
  m.frozen.backbone = make_backbone(dims, sb, opt.sigma_b);
  m.frozen.generator = make_generator(m.frozen.backbone);
  auto sp = rng::substream(seed, "frozen/probe");
  m.frozen.probe = loss::init_probe(dims.probe_dim, dims.D, sp);
  m.params = init_params(dims, ball, seed, opt.hyper_gain);
  return m;
}

// ---------------------------------------------------------------------------
// Typed network view over a parameter set
// ---------------------------------------------------------------------------

template <class S>
struct Nets {
  nn::Mlp<S> encoder;
  nn::Mlp<S> decoder;
  nn::MobiusLinear<S> hyper;
  nn::Mlr<S> mlr;
};

template <class S>
nn::Mlp<S> unpack_mlp(const std::string& prefix, std::size_t n_layers, const ParamsT<S>& p) {
  nn::Mlp<S> mlp;
  for (std::size_t l = 0; l < n_layers; ++l) {
    mlp.layers.push_back({as_matrix(p.at(prefix + ".W" + std::to_string(l))),
                          p.at(prefix + ".b" + std::to_string(l)).v});
  }
  return mlp;
}

template <class S>
Nets<S> build_nets(const Dims& d, const geom::Ball& ball, const ParamsT<S>& p) {
  Nets<S> nets;
  nets.encoder = unpack_mlp<S>("encoder", d.enc_hidden.size() + 1, p);
  nets.decoder = unpack_mlp<S>("decoder", d.dec_hidden.size() + 1, p);
  nets.hyper = nn::MobiusLinear<S>{as_matrix(p.at("hyper.M")), p.at("hyper.bq").v, ball};
  nets.mlr = nn::Mlr<S>{as_matrix(p.at("mlr.q")), as_matrix(p.at("mlr.a")), ball};
  return nets;
}

// ---------------------------------------------------------------------------
// Forward paths
// ---------------------------------------------------------------------------

template <class S>
Vec<S> constants(const Vec<double>& v) {
  return Vec<S>(v.begin(), v.end());
}

template <class S>
struct Encoded {
  Vec<double> w;  // backbone latent (frozen path, no gradient)
  Vec<S> z;       // point on the ball
};

template <class S>
Encoded<S> encode(const HaeModel& m, const Nets<S>& nets, const Vec<double>& x) {
  if (x.size() != m.dims.D) throw DimensionError("encode: input size mismatch");
  Encoded<S> out;
  out.w = backbone_apply(m.frozen.backbone, x);
  auto h = nn::mlp_forward(nets.encoder, constants<S>(out.w));
  out.z = nn::mobius_linear(nets.hyper, geom::exp_map_origin(h, m.ball));
  return out;
}

template <class S>
struct Decoded {
  Vec<S> wprime;
  Vec<S> xhat;
};

template <class S>
Decoded<S> decode(const HaeModel& m, const Nets<S>& nets, const Vec<S>& z) {
  Decoded<S> out;
  out.wprime = nn::mlp_forward(nets.decoder, geom::log_map_origin(z, m.ball));
  out.xhat = generator_apply(m.frozen.generator, out.wprime);
  return out;
}

template <class S>
Vec<S> classify(const Nets<S>& nets, const Vec<S>& z) {
  using std::exp;
  auto logits = nn::mlr_logits(nets.mlr, z);
  double mx = value_of(logits[0]);
  for (auto& l : logits) mx = std::max(mx, value_of(l));
  Vec<S> e;
  e.reserve(logits.size());
  for (auto& l : logits) e.push_back(exp(l - S(mx)));
  auto z_sum = vsum(e);
  for (auto& ei : e) ei = ei / z_sum;
  return e;
}

template <class S>
loss::Breakdown<S> training_loss(const HaeModel& m, const Nets<S>& nets,
                                 const std::vector<Vec<double>>& xs,
                                 const std::vector<std::size_t>& labels,
                                 const loss::Weights& weights = {},
                                 bool lambda2_dynamic = false) {
  if (xs.empty()) throw DomainError("training_loss: empty batch");
  if (xs.size() != labels.size()) throw DimensionError("training_loss: label count mismatch");
  std::vector<Vec<double>> ws;
  std::vector<Vec<S>> xhats, wprimes, logits;
  ws.reserve(xs.size());
  for (auto& x : xs) {
    auto enc = encode(m, nets, x);
    auto dec = decode(m, nets, enc.z);
    logits.push_back(nn::mlr_logits(nets.mlr, enc.z));
    ws.push_back(std::move(enc.w));
    wprimes.push_back(std::move(dec.wprime));
    xhats.push_back(std::move(dec.xhat));
  }
  auto l2 = loss::l2_loss(xs, xhats);
  auto perc = loss::perceptual_proxy_loss(m.frozen.probe, xs, xhats);
  auto rec = loss::latent_rec_loss(ws, wprimes);
  auto hyper = loss::nll_loss(logits, labels);
  return loss::total_loss(l2, perc, rec, hyper, weights, lambda2_dynamic);
}

// Test-only configuration in which every trainable map is the identity and the
// frozen maps are exact inverses of each other.
inline HaeModel make_identity_model(std::size_t dim, std::uint64_t seed = 1) {
  Dims d;
  d.D = d.d_w = d.d_z = d.n = dim;
  d.enc_hidden.clear();
  d.dec_hidden.clear();
  d.probe_dim = dim;
  d.K = 2;
  HaeModel m;
  m.dims = d;
  m.ball = geom::Ball{};
  m.seed = seed;

  Matrix<double> eye(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) eye(i, i) = 1.0;
  m.frozen.backbone = FrozenBackbone{eye, Vec<double>(dim, 0.0)};
  m.frozen.generator = FrozenGenerator{eye, Vec<double>(dim, 0.0)};
  m.frozen.probe = loss::Probe{eye, false, 0.2};

  m.params.add("encoder.W0", tensor_from(eye));
  m.params.add("encoder.b0", tensor_from(Vec<double>(dim, 0.0)));
  m.params.add("decoder.W0", tensor_from(eye));
  m.params.add("decoder.b0", tensor_from(Vec<double>(dim, 0.0)));
  m.params.add("hyper.M", tensor_from(eye));
  m.params.add("hyper.bq", tensor_from(Vec<double>(dim, 0.0)));
  auto s = rng::substream(seed, "init/mlr");
  auto mlr = nn::init_mlr(2, dim, m.ball, s);
  m.params.add("mlr.q", tensor_from(mlr.q));
  m.params.add("mlr.a", tensor_from(mlr.a));
  return m;
}

}  // namespace model
}  // namespace hyperlat
