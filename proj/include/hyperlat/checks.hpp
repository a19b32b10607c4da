#pragma once

// Verification suites: the geometry identity battery and the finite-difference
// gradient battery, with a deliberate-corruption fixture for exercising the
// failure path end to end.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperlat/common.hpp"
#include "hyperlat/geometry.hpp"
#include "hyperlat/grad.hpp"
#include "hyperlat/layers.hpp"
#include "hyperlat/losses.hpp"
#include "hyperlat/model.hpp"
#include "hyperlat/rng.hpp"

namespace hyperlat {
namespace checks {

enum class Fault { kNone, kDistanceBias };

inline Fault fault_from(const std::string& name) {
  if (name.empty() || name == "none") return Fault::kNone;
  if (name == "distance-bias") return Fault::kDistanceBias;
  throw DomainError("unknown fault '" + name + "'");
}

struct LawResult {
  std::string law;
  double worst_err = 0.0;
  double tol = 0.0;
  std::size_t checks = 0;
  std::size_t failures = 0;
};

struct SuiteReport {
  std::string suite;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::vector<LawResult> laws;

  bool pass() const { return failures == 0; }
  const LawResult& worst() const {
    std::size_t w = 0;
    for (std::size_t i = 1; i < laws.size(); ++i) {
      if (laws[i].worst_err / laws[i].tol > laws[w].worst_err / laws[w].tol) w = i;
    }
    return laws[w];
  }
};

namespace detail {

struct LawTable {
  std::vector<LawResult> laws;

  LawResult& at(const std::string& name, double tol) {
    for (auto& l : laws) {
      if (l.law == name) return l;
    }
    laws.push_back(LawResult{name, 0.0, tol, 0, 0});
    return laws.back();
  }

  void record(const std::string& name, double err, double tol) {
    auto& l = at(name, tol);
    l.checks += 1;
    l.worst_err = std::max(l.worst_err, err);
    if (!(err <= tol)) l.failures += 1;
  }

  SuiteReport finish(std::string suite) const {
    SuiteReport rep;
    rep.suite = std::move(suite);
    rep.laws = laws;
    for (const auto& l : laws) {
      rep.checks += l.checks;
      rep.failures += l.failures;
    }
    return rep;
  }
};

inline double linf(const Vec<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

inline double linf_diff(const Vec<double>& a, const Vec<double>& b) {
  return linf(vsub(a, b));
}

inline Vec<double> draw_at_radius(rng::Stream& s, std::size_t dim, double r,
                                  const geom::Ball& B) {
  auto dir = s.unit_vector(dim);
  double norm = std::tanh(B.sqrtc() * r / 2.0) / B.sqrtc();
  return vscale(norm, dir);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Identity suite: gyrogroup laws, map roundtrips, distance laws.
// Runs on a tight-clamp ball (eps = 1e-5) so radius-6 operands keep their
// doubled-radius intermediates representable.
// ---------------------------------------------------------------------------

struct IdentityOptions {
  std::size_t n_pairs = 10000;
  std::size_t dim = 16;
  double curvature = 1.0;
  double tol = 1e-8;
  double max_radius = 6.0;
  std::uint64_t seed = 20240817;
  Fault fault = Fault::kNone;
};

inline SuiteReport run_identity_suite(const IdentityOptions& opt = {}) {
  geom::Ball B{opt.curvature, 1e-5};
  rng::Stream s(rng::derive(opt.seed, "checks/identities"));
  detail::LawTable tab;
  const double tol = opt.tol;

  auto dist = [&](const Vec<double>& a, const Vec<double>& b) {
    double d = geom::distance(a, b, B);
    if (opt.fault == Fault::kDistanceBias) d += 1e-6 * (1.0 + d);
    return d;
  };

  const Vec<double> zero(opt.dim, 0.0);
  for (std::size_t rep = 0; rep < opt.n_pairs; ++rep) {
    auto x = detail::draw_at_radius(s, opt.dim, s.uniform(0.0, opt.max_radius), B);
    auto y = detail::draw_at_radius(s, opt.dim, s.uniform(0.0, opt.max_radius), B);
    auto z = detail::draw_at_radius(s, opt.dim, s.uniform(0.0, opt.max_radius), B);

    tab.record("left_identity", detail::linf_diff(geom::mobius_add(zero, x, B), x), tol);
    tab.record("right_identity", detail::linf_diff(geom::mobius_add(x, zero, B), x), tol);
    tab.record("left_inverse", detail::linf(geom::mobius_add(vneg(x), x, B)), tol);
    tab.record("left_cancellation",
               detail::linf_diff(geom::mobius_add(vneg(x), geom::mobius_add(x, y, B), B), y),
               tol);

    double t1 = s.uniform(0.0, 0.9), t2 = s.uniform(0.0, 0.9);
    tab.record("scalar_distributivity",
               detail::linf_diff(geom::mobius_scalar_mul(t1 + t2, x, B),
                                 geom::mobius_add(geom::mobius_scalar_mul(t1, x, B),
                                                  geom::mobius_scalar_mul(t2, x, B), B)),
               tol);
    double u1 = s.uniform(-1.4, 1.4), u2 = s.uniform(-1.4, 1.4);
    tab.record("scalar_associativity",
               detail::linf_diff(geom::mobius_scalar_mul(u1 * u2, x, B),
                                 geom::mobius_scalar_mul(
                                     u1, geom::mobius_scalar_mul(u2, x, B), B)),
               tol);
    tab.record("radius_scalar_linearity",
               std::abs(geom::radius_of(geom::mobius_scalar_mul(u1, x, B), B) -
                        std::abs(u1) * geom::radius_of(x, B)),
               tol);

    auto v = vscale(s.uniform(0.0, 0.5 * opt.max_radius) / B.sqrtc(), s.unit_vector(opt.dim));
    tab.record("exp_log_origin_roundtrip",
               detail::linf_diff(geom::log_map_origin(geom::exp_map_origin(v, B), B), v), tol);
    tab.record("log_exp_origin_roundtrip",
               detail::linf_diff(geom::exp_map_origin(geom::log_map_origin(x, B), B), x), tol);

    auto base = detail::draw_at_radius(s, opt.dim, s.uniform(0.0, opt.max_radius / 2.0), B);
    auto vb = vscale(s.uniform(0.0, opt.max_radius / 2.0) / geom::conformal_factor(base, B),
                     s.unit_vector(opt.dim));
    tab.record("exp_log_based_roundtrip",
               detail::linf_diff(geom::log_map(base, geom::exp_map(base, vb, B), B), vb), tol);

    tab.record("distance_symmetry", std::abs(dist(x, y) - dist(y, x)), tol);
    tab.record("distance_dual_agreement", std::abs(dist(x, y) - geom::distance_gyro(x, y, B)),
               tol);
    tab.record("triangle_inequality",
               std::max(0.0, dist(x, z) - (dist(x, y) + dist(y, z))), tol);
  }
  return tab.finish("identities");
}

// ---------------------------------------------------------------------------
// Gradient suite: finite-difference verification of every differentiable
// primitive plus the end-to-end training loss.
// ---------------------------------------------------------------------------

struct GradOptions {
  std::size_t n_configs = 100;
  double tol = 1e-4;
  double h = 1e-6;
  std::uint64_t seed = 20240817;
};

namespace detail {

struct GradConfig {
  std::string name;
  ParamSet params;
  grad::LossFn fn;
};

// Scalar readout with fixed random weights, so vector outputs become a loss.
inline Vec<double> readout(rng::Stream& s, std::size_t n) { return s.normals(n); }

inline GradConfig make_grad_config(std::size_t kind, std::uint64_t cfg_seed,
                                   const geom::Ball& B) {
  using ad::Var;
  rng::Stream s(cfg_seed);
  GradConfig c;
  switch (kind % 12) {
    case 0: {
      c.name = "geometry/mobius_add";
      c.params.add("x", tensor_from(draw_at_radius(s, 4, s.uniform(0.1, 2.6), B)));
      c.params.add("y", tensor_from(draw_at_radius(s, 4, s.uniform(0.1, 2.6), B)));
      auto w = readout(s, 4);
      c.fn = [w, B](ad::Tape&, const VarParams& p) {
        return vdot(geom::mobius_add(p.at("x").v, p.at("y").v, B), w);
      };
      break;
    }
    case 1: {
      c.name = "geometry/mobius_scalar_mul";
      c.params.add("x", tensor_from(draw_at_radius(s, 4, s.uniform(0.1, 2.6), B)));
      c.params.add("t", TensorT<double>{{1}, {s.uniform(-2.0, 2.0)}});
      auto w = readout(s, 4);
      c.fn = [w, B](ad::Tape&, const VarParams& p) {
        return vdot(geom::mobius_scalar_mul(p.at("t").v[0], p.at("x").v, B), w);
      };
      break;
    }
    case 2: {
      c.name = "geometry/exp_map_origin";
      c.params.add("v", tensor_from(vscale(s.uniform(0.05, 2.7), s.unit_vector(5))));
      auto w = readout(s, 5);
      c.fn = [w, B](ad::Tape&, const VarParams& p) {
        return vdot(geom::exp_map_origin(p.at("v").v, B), w);
      };
      break;
    }
    case 3: {
      c.name = "geometry/log_map_origin";
      c.params.add("y", tensor_from(draw_at_radius(s, 5, s.uniform(0.1, 5.5), B)));
      auto w = readout(s, 5);
      c.fn = [w, B](ad::Tape&, const VarParams& p) {
        return vdot(geom::log_map_origin(p.at("y").v, B), w);
      };
      break;
    }
    case 4: {
      c.name = "geometry/exp_map";
      auto base = draw_at_radius(s, 4, s.uniform(0.1, 2.6), B);
      double budget = 2.6 / geom::conformal_factor(base, B);
      c.params.add("base", tensor_from(base));
      c.params.add("v", tensor_from(vscale(s.uniform(0.05, budget), s.unit_vector(4))));
      auto w = readout(s, 4);
      c.fn = [w, B](ad::Tape&, const VarParams& p) {
        return vdot(geom::exp_map(p.at("base").v, p.at("v").v, B), w);
      };
      break;
    }
    case 5: {
      c.name = "geometry/log_map";
      c.params.add("base", tensor_from(draw_at_radius(s, 4, s.uniform(0.1, 2.6), B)));
      c.params.add("y", tensor_from(draw_at_radius(s, 4, s.uniform(0.1, 2.6), B)));
      auto w = readout(s, 4);
      c.fn = [w, B](ad::Tape&, const VarParams& p) {
        return vdot(geom::log_map(p.at("base").v, p.at("y").v, B), w);
      };
      break;
    }
    case 6: {
      c.name = "geometry/distance";
      auto x = draw_at_radius(s, 5, s.uniform(0.5, 2.6), B);
      Vec<double> y;
      do {
        y = draw_at_radius(s, 5, s.uniform(0.5, 2.6), B);
      } while (geom::distance(x, y, B) < 0.1);  // keep clear of the d = 0 kink
      c.params.add("x", tensor_from(x));
      c.params.add("y", tensor_from(y));
      c.fn = [B](ad::Tape&, const VarParams& p) {
        return geom::distance(p.at("x").v, p.at("y").v, B);
      };
      break;
    }
    case 7: {
      c.name = "geometry/conformal_factor";
      c.params.add("x", tensor_from(draw_at_radius(s, 5, s.uniform(0.1, 5.5), B)));
      c.fn = [B](ad::Tape&, const VarParams& p) {
        return geom::conformal_factor(p.at("x").v, B);
      };
      break;
    }
    case 8: {
      c.name = "nn/mobius_linear";
      auto layer = nn::init_mobius_linear(3, 3, B, s);
      c.params.add("M", tensor_from(layer.M));
      c.params.add("bq", tensor_from(layer.bq));
      c.params.add("x", tensor_from(draw_at_radius(s, 3, s.uniform(0.1, 2.0), B)));
      auto w = readout(s, 3);
      c.fn = [w, B](ad::Tape&, const VarParams& p) {
        nn::MobiusLinear<Var> lin{as_matrix(p.at("M")), p.at("bq").v, B};
        return vdot(nn::mobius_linear(lin, p.at("x").v), w);
      };
      break;
    }
    case 9: {
      c.name = "nn/mlr_nll";
      auto mlr = nn::init_mlr(3, 4, B, s);
      c.params.add("q", tensor_from(mlr.q));
      c.params.add("a", tensor_from(mlr.a));
      c.params.add("z", tensor_from(draw_at_radius(s, 4, s.uniform(0.1, 2.6), B)));
      std::size_t label = s.index(3);
      c.fn = [label, B](ad::Tape&, const VarParams& p) {
        nn::Mlr<Var> mlr{as_matrix(p.at("q")), as_matrix(p.at("a")), B};
        return loss::nll_single(nn::mlr_logits(mlr, p.at("z").v), label);
      };
      break;
    }
    case 10: {
      c.name = "nn/mlp";
      Vec<double> x;
      nn::Mlp<double> net;
      // Redraw until every hidden pre-activation clears the LeakyReLU kink by
      // a margin far above the finite-difference step.
      bool safe = false;
      while (!safe) {
        net = nn::init_mlp({3, 4, 2}, s);
        x = s.normals(3);
        auto h = affine(net.layers[0], x);
        safe = true;
        for (double hv : h) safe = safe && std::abs(hv) > 1e-3;
      }
      c.params.add("W0", tensor_from(net.layers[0].W));
      c.params.add("b0", tensor_from(net.layers[0].b));
      c.params.add("W1", tensor_from(net.layers[1].W));
      c.params.add("b1", tensor_from(net.layers[1].b));
      auto w = readout(s, 2);
      Vec<double> xc = x;
      c.fn = [w, xc](ad::Tape&, const VarParams& p) {
        nn::Mlp<Var> net;
        net.layers.push_back({as_matrix(p.at("W0")), p.at("b0").v});
        net.layers.push_back({as_matrix(p.at("W1")), p.at("b1").v});
        return vdot(nn::mlp_forward(net, model::constants<Var>(xc)), w);
      };
      break;
    }
    default: {
      c.name = "model/end_to_end_loss";
      model::Dims d;
      d.D = 6;
      d.d_w = 5;
      d.d_z = 3;
      d.n = 3;
      d.enc_hidden = {4};
      d.dec_hidden = {4};
      d.probe_dim = 4;
      d.K = 3;
      auto m = model::create(d, B, rng::derive(cfg_seed, "model"));
      std::vector<Vec<double>> xs{s.normals(6), s.normals(6)};
      std::vector<std::size_t> labels{s.index(3), s.index(3)};
      c.params = m.params;
      c.fn = [m, xs, labels](ad::Tape&, const VarParams& p) {
        auto nets = model::build_nets<Var>(m.dims, m.ball, p);
        return model::training_loss(m, nets, xs, labels, loss::Weights{}, true).total;
      };
      break;
    }
  }
  return c;
}

}  // namespace detail

inline SuiteReport run_grad_suite(const GradOptions& opt = {}) {
  geom::Ball B{};
  detail::LawTable tab;
  grad::FdOptions fd;
  fd.h = opt.h;
  fd.tol = opt.tol;
  fd.max_coords_per_tensor = 24;

  for (std::size_t i = 0; i < opt.n_configs; ++i) {
    auto cfg = detail::make_grad_config(
        i, rng::derive(opt.seed, "checks/cfg/" + std::to_string(i)), B);
    fd.seed = rng::derive(opt.seed, "checks/fd/" + std::to_string(i));
    auto rep = grad::finite_diff_check(cfg.fn, cfg.params, fd);
    auto& law = tab.at(cfg.name, opt.tol);
    law.checks += rep.coords_checked;
    law.worst_err = std::max(law.worst_err, rep.max_rel_err);
    if (!rep.pass) law.failures += 1;
  }
  return tab.finish("grads");
}

}  // namespace checks
}  // namespace hyperlat
