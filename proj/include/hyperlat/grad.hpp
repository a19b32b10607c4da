#pragma once

// Analytic gradients over a ParamSet plus an independent central-difference
// verifier.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>

#include "hyperlat/autodiff.hpp"
#include "hyperlat/common.hpp"
#include "hyperlat/params.hpp"
#include "hyperlat/rng.hpp"

namespace hyperlat {
namespace grad {

// A scalar objective: rebuildable on any tape from a Var view of the params.
using LossFn = std::function<ad::Var(ad::Tape&, const VarParams&)>;

struct ValueGrad {
  double value = 0.0;
  ParamSet grad;
};

inline double loss_value(const LossFn& fn, const ParamSet& params) {
  ad::Tape tape;
  VarParams vp = lift(tape, params);
  ad::Var loss = fn(tape, vp);
  tape.ensure_finite(loss);
  return loss.v;
}

inline ValueGrad value_and_grad(const LossFn& fn, const ParamSet& params) {
  ad::Tape tape;
  VarParams vp = lift(tape, params);
  ad::Var loss = fn(tape, vp);
  tape.ensure_finite(loss);
  tape.backward(loss);
  ValueGrad out{loss.v, zeros_like(params)};
  for (auto& [name, vt] : vp.t) {
    auto& g = out.grad.at(name).v;
    for (std::size_t i = 0; i < vt.v.size(); ++i) g[i] = tape.adjoint(vt.v[i]);
  }
  return out;
}

struct GradReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  std::map<std::string, double> per_tensor;  // max relative error per tensor

  std::string worst_tensor() const {
    std::string name;
    double worst = -1.0;
    for (auto& [k, e] : per_tensor) {
      if (e > worst) { worst = e; name = k; }
    }
    return name;
  }
};

struct FdOptions {
  double h = 1e-6;
  double tol = 1e-4;
  std::size_t max_coords_per_tensor = 64;
  std::uint64_t seed = 20240817;
};

// Central differences on a random coordinate sample per tensor; relative
// error |a - n| / max(1, |a|, |n|) must stay within tol for every coordinate.
inline GradReport finite_diff_check(const LossFn& fn, const ParamSet& params,
                                    const FdOptions& opt = {}) {
  ValueGrad vg = value_and_grad(fn, params);
  GradReport report;
  report.coords_checked = 0;
  double worst = 0.0;
  for (auto& [name, t] : params.t) {
    std::vector<std::size_t> idx(t.v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng::Stream s(rng::derive(opt.seed, "fd/" + name));
    if (idx.size() > opt.max_coords_per_tensor) {
      s.shuffle(idx);
      idx.resize(opt.max_coords_per_tensor);
    }
    double tensor_worst = 0.0;
    ParamSet work = params;
    auto& wv = work.at(name).v;
    for (std::size_t i : idx) {
      const double saved = wv[i];
      wv[i] = saved + opt.h;
      double up = loss_value(fn, work);
      wv[i] = saved - opt.h;
      double dn = loss_value(fn, work);
      wv[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(dn)) {
        throw NumericError("finite_diff_check: loss non-finite near '" + name + "'");
      }
      double numeric = (up - dn) / (2.0 * opt.h);
      double analytic = vg.grad.at(name).v[i];
      double rel = std::abs(analytic - numeric) /
                   std::max({1.0, std::abs(analytic), std::abs(numeric)});
      tensor_worst = std::max(tensor_worst, rel);
      ++report.coords_checked;
    }
    report.per_tensor[name] = tensor_worst;
    worst = std::max(worst, tensor_worst);
  }
  report.max_rel_err = worst;
  report.pass = worst <= opt.tol;
  return report;
}

}  // namespace grad
}  // namespace hyperlat
