#pragma once

// Adam optimizer, training loop, and checkpoint persistence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hyperlat/common.hpp"
#include "hyperlat/data.hpp"
#include "hyperlat/grad.hpp"
#include "hyperlat/losses.hpp"
#include "hyperlat/model.hpp"
#include "hyperlat/params.hpp"
#include "hyperlat/rng.hpp"

namespace hyperlat {
namespace train {

struct TrainConfig {
  std::size_t steps = 5000;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;  // desk-scale default
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  loss::Weights weights{};
  bool lambda2_dynamic = true;
  std::uint64_t seed = 20240817;

  void validate() const {
    if (steps < 1) throw DomainError("TrainConfig: steps must be >= 1");
    if (batch_size < 1) throw DomainError("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw DomainError("TrainConfig: learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw DomainError("TrainConfig: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw DomainError("TrainConfig: eps must be > 0");
  }

  static TrainConfig desk() { return TrainConfig{}; }
  // Week-scale preset: same budget, the smaller published learning rate.
  static TrainConfig faithful() {
    TrainConfig c;
    c.learning_rate = 1e-4;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::size_t t = 0;
  ParamSet m;
  ParamSet v;
};

inline AdamState make_adam_state(const ParamSet& params) {
  return AdamState{0, zeros_like(params), zeros_like(params)};
}

inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& st,
                      const TrainConfig& cfg) {
  st.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(st.t));
  for (auto& [name, p] : params.t) {
    const auto& g = grads.at(name);
    if (g.shape != p.shape) throw DimensionError("adam_step: shape mismatch for '" + name + "'");
    for (double gv : g.v) {
      if (!std::isfinite(gv)) {
        throw NumericError("adam_step: non-finite gradient for '" + name + "'");
      }
    }
    auto& m = st.m.t.at(name);
    auto& v = st.v.t.at(name);
    for (std::size_t i = 0; i < p.v.size(); ++i) {
      m.v[i] = cfg.beta1 * m.v[i] + (1.0 - cfg.beta1) * g.v[i];
      v.v[i] = cfg.beta2 * v.v[i] + (1.0 - cfg.beta2) * g.v[i] * g.v[i];
      const double mhat = m.v[i] / bc1;
      const double vhat = v.v[i] / bc2;
      p.v[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct Checkpoint {
  int format_version = 1;
  TrainConfig config;
  model::Dims dims;
  double curvature = 1.0;
  double ball_eps = 4e-3;
  double sigma_b = 1.5;
  std::uint64_t model_seed = 0;
  std::size_t step = 0;
  ParamSet params;
  std::map<std::string, double> final_metrics;
};

inline Checkpoint make_checkpoint(const model::HaeModel& m, const TrainConfig& cfg,
                                  std::size_t step,
                                  std::map<std::string, double> metrics = {}) {
  Checkpoint c;
  c.config = cfg;
  c.dims = m.dims;
  c.curvature = m.ball.c;
  c.ball_eps = m.ball.eps;
  c.sigma_b = m.sigma_b;
  c.model_seed = m.seed;
  c.step = step;
  c.params = m.params;
  c.final_metrics = std::move(metrics);
  return c;
}

// Reconstructs the frozen parts from the stored seed, then installs the saved
// trainable tensors; forward outputs reproduce the captured model exactly.
inline model::HaeModel rebuild_model(const Checkpoint& c) {
  geom::Ball ball{c.curvature, c.ball_eps};
  auto m = model::create(c.dims, ball, c.model_seed, model::CreateOptions{c.sigma_b});
  m.params = c.params;
  return m;
}

namespace detail {

inline void json_size_list(std::ostringstream& o, const std::vector<std::size_t>& v) {
  o << "[";
  for (std::size_t i = 0; i < v.size(); ++i) o << (i ? "," : "") << v[i];
  o << "]";
}

}  // namespace detail

inline std::string checkpoint_to_json(const Checkpoint& c) {
  std::ostringstream o;
  const auto& g = c.config;
  o << "{\n";
  o << "\"format_version\": " << c.format_version << ",\n";
  o << "\"config\": {\n";
  o << "  \"steps\": " << g.steps << ",\n";
  o << "  \"batch_size\": " << g.batch_size << ",\n";
  o << "  \"learning_rate\": " << fmt17(g.learning_rate) << ",\n";
  o << "  \"beta1\": " << fmt17(g.beta1) << ",\n";
  o << "  \"beta2\": " << fmt17(g.beta2) << ",\n";
  o << "  \"eps\": " << fmt17(g.eps) << ",\n";
  o << "  \"lambda1\": " << fmt17(g.weights.lambda1) << ",\n";
  o << "  \"lambda2\": " << fmt17(g.weights.lambda2) << ",\n";
  o << "  \"lambda3\": " << fmt17(g.weights.lambda3) << ",\n";
  o << "  \"lambda2_dynamic\": " << (g.lambda2_dynamic ? "true" : "false") << ",\n";
  o << "  \"seed\": " << g.seed << ",\n";
  o << "  \"model\": {\"D\": " << c.dims.D << ", \"d_w\": " << c.dims.d_w
    << ", \"d_z\": " << c.dims.d_z << ", \"n\": " << c.dims.n << ", \"enc_hidden\": ";
  detail::json_size_list(o, c.dims.enc_hidden);
  o << ", \"dec_hidden\": ";
  detail::json_size_list(o, c.dims.dec_hidden);
  o << ", \"probe_dim\": " << c.dims.probe_dim << ", \"K\": " << c.dims.K
    << ", \"curvature\": " << fmt17(c.curvature) << ", \"ball_eps\": " << fmt17(c.ball_eps)
    << ", \"sigma_b\": " << fmt17(c.sigma_b) << "}\n";
  o << "},\n";
  o << "\"frozen_seeds\": {\"model\": " << c.model_seed << "},\n";
  o << "\"step\": " << c.step << ",\n";
  o << "\"params\": {\n";
  std::size_t left = c.params.t.size();
  for (const auto& [name, t] : c.params.t) {
    o << "  \"" << name << "\": {\"shape\": ";
    detail::json_size_list(o, t.shape);
    o << ", \"data\": [";
    for (std::size_t i = 0; i < t.v.size(); ++i) o << (i ? "," : "") << fmt17(t.v[i]);
    o << "]}" << (--left ? "," : "") << "\n";
  }
  o << "},\n";
  o << "\"final_metrics\": {";
  left = c.final_metrics.size();
  for (const auto& [k, v] : c.final_metrics) {
    o << "\"" << k << "\": " << fmt17(v) << (--left ? ", " : "");
  }
  o << "}\n";
  o << "}\n";
  return o.str();
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot open '" + path + "'");
  out << checkpoint_to_json(c);
  if (!out) throw IoError("save_checkpoint: write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("load_checkpoint: malformed JSON: ") + e.what());
  }
  try {
    Checkpoint c;
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != 1) {
      throw IoError("load_checkpoint: unsupported format_version " +
                    std::to_string(c.format_version));
    }
    const auto& g = j.at("config");
    c.config.steps = g.at("steps").get<std::size_t>();
    c.config.batch_size = g.at("batch_size").get<std::size_t>();
    c.config.learning_rate = g.at("learning_rate").get<double>();
    c.config.beta1 = g.at("beta1").get<double>();
    c.config.beta2 = g.at("beta2").get<double>();
    c.config.eps = g.at("eps").get<double>();
    c.config.weights.lambda1 = g.at("lambda1").get<double>();
    c.config.weights.lambda2 = g.at("lambda2").get<double>();
    c.config.weights.lambda3 = g.at("lambda3").get<double>();
    c.config.lambda2_dynamic = g.at("lambda2_dynamic").get<bool>();
    c.config.seed = g.at("seed").get<std::uint64_t>();
    const auto& md = g.at("model");
    c.dims.D = md.at("D").get<std::size_t>();
    c.dims.d_w = md.at("d_w").get<std::size_t>();
    c.dims.d_z = md.at("d_z").get<std::size_t>();
    c.dims.n = md.at("n").get<std::size_t>();
    c.dims.enc_hidden = md.at("enc_hidden").get<std::vector<std::size_t>>();
    c.dims.dec_hidden = md.at("dec_hidden").get<std::vector<std::size_t>>();
    c.dims.probe_dim = md.at("probe_dim").get<std::size_t>();
    c.dims.K = md.at("K").get<std::size_t>();
    c.curvature = md.at("curvature").get<double>();
    c.ball_eps = md.at("ball_eps").get<double>();
    c.sigma_b = md.at("sigma_b").get<double>();
    c.model_seed = j.at("frozen_seeds").at("model").get<std::uint64_t>();
    c.step = j.at("step").get<std::size_t>();
    for (const auto& [name, tj] : j.at("params").items()) {
      TensorT<double> t;
      t.shape = tj.at("shape").get<std::vector<std::size_t>>();
      t.v = tj.at("data").get<std::vector<double>>();
      if (t.v.size() != t.numel()) {
        throw IoError("load_checkpoint: tensor '" + name + "' shape/data mismatch");
      }
      c.params.add(name, std::move(t));
    }
    for (const auto& [k, v] : j.at("final_metrics").items()) {
      c.final_metrics[k] = v.get<double>();
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("load_checkpoint: missing or mistyped field: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct StepMetrics {
  std::size_t step = 0;
  double l2 = 0.0;
  double perceptual = 0.0;
  double latent_rec = 0.0;
  double hyper = 0.0;
  double total = 0.0;
  double lambda2_used = 0.0;
};

struct DivergenceError : Error {
  Checkpoint last_good;
  DivergenceError(const std::string& msg, Checkpoint ck)
      : Error(msg), last_good(std::move(ck)) {}
};

struct FitResult {
  model::HaeModel model;
  Checkpoint checkpoint;
  std::vector<StepMetrics> history;
};

inline FitResult fit(const model::HaeModel& m0, const data::HierDataset& ds,
                     const TrainConfig& cfg) {
  cfg.validate();

  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].split == data::Split::kSeen) seen.push_back(i);
  }
  if (seen.empty()) throw DomainError("fit: dataset has no seen-class samples");
  if (cfg.batch_size > seen.size()) {
    throw DomainError("fit: batch_size exceeds the number of seen samples");
  }
  auto label_map = data::seen_label_map(ds);
  if (label_map.size() != m0.dims.K) {
    throw DimensionError("fit: model expects " + std::to_string(m0.dims.K) +
                         " classes, dataset has " + std::to_string(label_map.size()) +
                         " seen classes");
  }

  model::HaeModel m = m0;
  AdamState state = make_adam_state(m.params);
  auto shuffle_stream = rng::substream(cfg.seed, "train/shuffle");
  std::vector<std::size_t> perm = seen;
  shuffle_stream.shuffle(perm);
  std::size_t cursor = 0;

  std::vector<StepMetrics> history;
  history.reserve(cfg.steps);
  ParamSet last_good = m.params;
  std::size_t last_good_step = 0;
  auto diverged = [&](const std::string& why) {
    model::HaeModel snap = m;
    snap.params = last_good;
    return DivergenceError("fit: " + why, make_checkpoint(snap, cfg, last_good_step));
  };

  const double ema_alpha = 2.0 / 101.0;  // window 100
  double ema = 0.0;
  double ema_min = 0.0;
  bool ema_started = false;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (cursor + cfg.batch_size > perm.size()) {
      shuffle_stream.shuffle(perm);
      cursor = 0;
    }
    std::vector<Vec<double>> xs;
    std::vector<std::size_t> labels;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto& s = ds.samples[perm[cursor++]];
      xs.push_back(s.x);
      labels.push_back(label_map.at(s.class_label));
    }

    StepMetrics sm;
    sm.step = step;
    grad::LossFn fn = [&](ad::Tape&, const VarParams& vp) {
      auto nets = model::build_nets<ad::Var>(m.dims, m.ball, vp);
      auto b = model::training_loss(m, nets, xs, labels, cfg.weights, cfg.lambda2_dynamic);
      sm.l2 = value_of(b.l2);
      sm.perceptual = value_of(b.perceptual);
      sm.latent_rec = value_of(b.latent_rec);
      sm.hyper = value_of(b.hyper);
      sm.total = value_of(b.total);
      sm.lambda2_used = b.lambda2_used;
      return b.total;
    };

    grad::ValueGrad vg;
    try {
      vg = grad::value_and_grad(fn, m.params);
    } catch (const NumericError& e) {
      throw diverged(std::string("loss became non-finite at step ") +
                     std::to_string(step) + " (" + e.what() + ")");
    }
    for (const auto& [name, t] : vg.grad.t) {
      for (double v : t.v) {
        if (!std::isfinite(v)) {
          throw diverged("non-finite gradient for '" + name + "' at step " +
                         std::to_string(step));
        }
      }
    }
    last_good = m.params;
    last_good_step = step;
    history.push_back(sm);

    if (!ema_started) {
      ema = sm.total;
      ema_started = true;
    } else {
      ema += ema_alpha * (sm.total - ema);
    }
    // Radial reorganization can legitimately double the loss for a while, so
    // the guard only trips on a sustained blow-up; non-finite values are
    // caught immediately above regardless.
    if (step == 100) ema_min = ema;
    if (step > 100) ema_min = std::min(ema_min, ema);
    if (step > 500 && ema > 3.0 * ema_min) {
      throw diverged("loss moving average rose to triple its minimum at step " +
                     std::to_string(step));
    }

    adam_step(m.params, vg.grad, state, cfg);
  }

  const auto& last = history.back();
  std::map<std::string, double> metrics{
      {"final_total", last.total},       {"final_l2", last.l2},
      {"final_perceptual", last.perceptual}, {"final_latent_rec", last.latent_rec},
      {"final_hyper", last.hyper},       {"initial_total", history.front().total},
      {"initial_l2", history.front().l2}};

  FitResult out{std::move(m), {}, std::move(history)};
  out.checkpoint = make_checkpoint(out.model, cfg, cfg.steps, std::move(metrics));
  return out;
}

}  // namespace train
}  // namespace hyperlat
