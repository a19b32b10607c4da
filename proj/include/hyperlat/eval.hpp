#pragma once

// Desk-scale evaluation: oracle classifier, preservation/diversity metrics,
// radius structure, and the radius sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hyperlat/common.hpp"
#include "hyperlat/data.hpp"
#include "hyperlat/edit.hpp"
#include "hyperlat/grad.hpp"
#include "hyperlat/model.hpp"
#include "hyperlat/rng.hpp"
#include "hyperlat/train.hpp"

namespace hyperlat {
namespace eval {

// ---------------------------------------------------------------------------
// Oracle classifier: a small Euclidean MLP over raw features, all classes.
// ---------------------------------------------------------------------------

struct OracleConfig {
  std::vector<std::size_t> hidden{32};
  std::size_t steps = 500;
  std::size_t batch_size = 32;
  double learning_rate = 5e-3;
  double holdout_fraction = 0.25;
  std::uint64_t seed = 20240817;
};

struct OracleClassifier {
  nn::Mlp<double> net;
  std::size_t n_classes = 0;
  double holdout_accuracy = 0.0;
};

inline std::size_t oracle_label(const OracleClassifier& oc, const Vec<double>& x) {
  auto logits = nn::mlp_forward(oc.net, x);
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

inline OracleClassifier train_oracle(const data::HierDataset& ds,
                                     const OracleConfig& cfg = {}) {
  if (ds.samples.empty()) throw DomainError("train_oracle: empty dataset");
  const std::size_t n_classes = data::n_classes(ds);
  if (n_classes < 2) throw DomainError("train_oracle: need at least 2 classes");

  std::vector<std::size_t> idx(ds.samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto split_stream = rng::substream(cfg.seed, "oracle/split");
  split_stream.shuffle(idx);
  const std::size_t n_hold = std::min(
      idx.size() - 1, std::size_t(cfg.holdout_fraction * double(idx.size())));
  std::vector<std::size_t> hold(idx.begin(), idx.begin() + n_hold);
  std::vector<std::size_t> tr(idx.begin() + n_hold, idx.end());
  if (tr.empty()) throw DomainError("train_oracle: no training samples after holdout");

  ParamSet params;
  {
    auto s = rng::substream(cfg.seed, "oracle/init");
    model::pack_mlp("oracle", nn::init_mlp(model::chain(ds.dim, cfg.hidden, n_classes), s),
                    params);
  }
  const std::size_t n_layers = cfg.hidden.size() + 1;

  train::TrainConfig opt;
  opt.learning_rate = cfg.learning_rate;
  auto state = train::make_adam_state(params);
  auto shuffle_stream = rng::substream(cfg.seed, "oracle/shuffle");
  std::vector<std::size_t> perm = tr;
  shuffle_stream.shuffle(perm);
  std::size_t cursor = 0;
  const std::size_t batch = std::min(cfg.batch_size, tr.size());

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (cursor + batch > perm.size()) {
      shuffle_stream.shuffle(perm);
      cursor = 0;
    }
    std::vector<const data::Sample*> bs;
    for (std::size_t b = 0; b < batch; ++b) bs.push_back(&ds.samples[perm[cursor++]]);

    grad::LossFn fn = [&](ad::Tape&, const VarParams& vp) {
      auto net = model::unpack_mlp<ad::Var>("oracle", n_layers, vp);
      std::vector<Vec<ad::Var>> logits;
      std::vector<std::size_t> labels;
      for (auto* s : bs) {
        logits.push_back(nn::mlp_forward(net, model::constants<ad::Var>(s->x)));
        labels.push_back(s->class_label);
      }
      return loss::nll_loss(logits, labels);
    };
    auto vg = grad::value_and_grad(fn, params);
    train::adam_step(params, vg.grad, state, opt);
  }

  OracleClassifier oc;
  oc.net = model::unpack_mlp<double>("oracle", n_layers, params);
  oc.n_classes = n_classes;
  std::size_t hits = 0;
  const auto& probe_set = hold.empty() ? tr : hold;
  for (std::size_t i : probe_set) {
    if (oracle_label(oc, ds.samples[i].x) == ds.samples[i].class_label) ++hits;
  }
  oc.holdout_accuracy = double(hits) / double(probe_set.size());
  return oc;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double diversity_proxy(const std::vector<Vec<double>>& xs) {
  if (xs.size() < 2) throw DomainError("diversity_proxy: need at least 2 samples");
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      acc += vnorm(vsub(xs[i], xs[j]));
      ++cnt;
    }
  }
  return acc / double(cnt);
}

struct PreserveConfig {
  std::size_t n_sources = 32;
  std::size_t n_perturbations = 8;
  // Small geodesic fraction per perturbation: the sweep is about what the
  // radius does to otherwise-identical edits, so the step itself is kept
  // small enough not to drown that signal.
  double t = 0.02;
  std::uint64_t seed = 20240817;
};

// A source embedding with the oracle label of its unperturbed reconstruction;
// preservation compares perturbed decodes against that reference label.
struct EvalSource {
  Vec<double> z;
  std::size_t label = 0;
};

struct SourceSet {
  std::vector<EvalSource> sources;
  std::vector<Vec<double>> pool;  // seen-split embeddings for geodesic references
};

inline SourceSet prepare_sources(const model::HaeModel& m, const OracleClassifier& oracle,
                                 const data::HierDataset& ds, const PreserveConfig& pc) {
  auto nets = model::build_nets<double>(m.dims, m.ball, m.params);
  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].split == data::Split::kSeen) seen.push_back(i);
  }
  if (seen.empty()) throw DomainError("prepare_sources: no seen-split samples");
  auto st = rng::substream(pc.seed, "eval/sources");
  st.shuffle(seen);
  const std::size_t n = std::min(pc.n_sources, seen.size());

  SourceSet out;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& x = ds.samples[seen[k]].x;
    auto z = model::encode(m, nets, x).z;
    auto xhat = model::decode(m, nets, z).xhat;
    out.sources.push_back({z, oracle_label(oracle, xhat)});
    out.pool.push_back(std::move(z));
  }
  return out;
}

struct SweepRow {
  double radius = 0.0;
  double preservation = 0.0;
  double diversity = 0.0;
  double mean_embedding_radius = 0.0;
};

inline SweepRow eval_at_radius(const model::HaeModel& m, const OracleClassifier& oracle,
                               const SourceSet& set, double r, const PreserveConfig& pc) {
  if (set.sources.empty()) throw DomainError("eval_at_radius: no sources");
  if (pc.n_perturbations < 1) throw DomainError("eval_at_radius: need perturbations");
  auto nets = model::build_nets<double>(m.dims, m.ball, m.params);

  std::size_t hits = 0, total = 0;
  double div_acc = 0.0, rad_acc = 0.0;
  for (std::size_t i = 0; i < set.sources.size(); ++i) {
    const auto& src = set.sources[i];
    std::vector<Vec<double>> decs;
    for (std::size_t j = 0; j < pc.n_perturbations; ++j) {
      auto tag = "eval/perturb/" + std::to_string(i) + "/" + std::to_string(j);
      auto spec = edit::PerturbSpec::geodesic(r, pc.t, rng::derive(pc.seed, tag));
      auto zp = edit::perturb_geodesic(src.z, set.pool, spec, m.ball);
      rad_acc += geom::radius_of(zp, m.ball);
      auto xhat = model::decode(m, nets, zp).xhat;
      if (oracle_label(oracle, xhat) == src.label) ++hits;
      ++total;
      decs.push_back(std::move(xhat));
    }
    if (decs.size() >= 2) div_acc += diversity_proxy(decs);
  }
  SweepRow row;
  row.radius = r;
  row.preservation = double(hits) / double(total);
  row.diversity = pc.n_perturbations >= 2 ? div_acc / double(set.sources.size()) : 0.0;
  row.mean_embedding_radius = rad_acc / double(total);
  return row;
}

inline double preservation_rate(const model::HaeModel& m, const OracleClassifier& oracle,
                                const data::HierDataset& ds, double r,
                                const PreserveConfig& pc = {}) {
  auto set = prepare_sources(m, oracle, ds, pc);
  return eval_at_radius(m, oracle, set, r, pc).preservation;
}

// ---------------------------------------------------------------------------
// Radius structure
// ---------------------------------------------------------------------------

struct RadiusStructureConfig {
  std::size_t max_pairs_per_class = 256;
  std::size_t max_cross_pairs = 1024;
  std::uint64_t seed = 20240817;
};

struct RadiusStructure {
  double mean_instance_radius = 0.0;
  double mean_same_class_midpoint_radius = 0.0;  // over classes with >= 2 samples
  double mean_cross_super_midpoint_radius = 0.0;
  std::map<std::size_t, double> class_instance_radius;
  // A class with fewer than two samples has no midpoints: its key is absent.
  std::map<std::size_t, double> class_midpoint_radius;
};

inline RadiusStructure radius_structure(const model::HaeModel& m, const data::HierDataset& ds,
                                        const RadiusStructureConfig& cfg = {}) {
  if (ds.samples.empty()) throw DomainError("radius_structure: empty dataset");
  auto nets = model::build_nets<double>(m.dims, m.ball, m.params);

  std::vector<Vec<double>> zs;
  zs.reserve(ds.samples.size());
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    zs.push_back(model::encode(m, nets, ds.samples[i].x).z);
    by_class[ds.samples[i].class_label].push_back(i);
  }

  RadiusStructure out;
  double acc = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) acc += geom::radius_of(zs[i], m.ball);
  out.mean_instance_radius = acc / double(zs.size());

  for (const auto& [c, members] : by_class) {
    double ci = 0.0;
    for (std::size_t i : members) ci += geom::radius_of(zs[i], m.ball);
    out.class_instance_radius[c] = ci / double(members.size());
    if (members.size() < 2) continue;
    auto st = rng::substream(cfg.seed, "eval/pairs/" + std::to_string(c));
    const std::size_t n_pairs =
        std::min(cfg.max_pairs_per_class, members.size() * (members.size() - 1) / 2);
    double cm = 0.0;
    for (std::size_t p = 0; p < n_pairs; ++p) {
      std::size_t i = st.index(members.size());
      std::size_t j = st.index(members.size() - 1);
      if (j >= i) ++j;
      auto mid = geom::geodesic_point(zs[members[i]], zs[members[j]], 0.5, m.ball);
      cm += geom::radius_of(mid, m.ball);
    }
    out.class_midpoint_radius[c] = cm / double(n_pairs);
  }
  if (!out.class_midpoint_radius.empty()) {
    double s = 0.0;
    for (auto& [c, v] : out.class_midpoint_radius) s += v;
    out.mean_same_class_midpoint_radius = s / double(out.class_midpoint_radius.size());
  }

  // Cross-superclass midpoints, seeded rejection sampling over sample pairs.
  std::map<std::size_t, std::size_t> supers;
  for (const auto& s : ds.samples) supers[s.super_label] += 1;
  if (supers.size() >= 2) {
    auto st = rng::substream(cfg.seed, "eval/pairs/cross");
    double cs = 0.0;
    for (std::size_t p = 0; p < cfg.max_cross_pairs; ++p) {
      std::size_t i = st.index(zs.size());
      std::size_t j = st.index(zs.size());
      while (ds.samples[i].super_label == ds.samples[j].super_label) j = st.index(zs.size());
      auto mid = geom::geodesic_point(zs[i], zs[j], 0.5, m.ball);
      cs += geom::radius_of(mid, m.ball);
    }
    out.mean_cross_super_midpoint_radius = cs / double(cfg.max_cross_pairs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Radius sweep
// ---------------------------------------------------------------------------

struct RadiusSweepReport {
  std::vector<SweepRow> rows;
  std::uint64_t seed = 0;
};

inline std::vector<double> default_radii(const geom::Ball& B) {
  const double rmax = B.max_radius();
  return {1.0 * rmax, 0.85 * rmax, 0.7 * rmax, 0.55 * rmax};
}

inline RadiusSweepReport sweep(const model::HaeModel& m, const OracleClassifier& oracle,
                               const data::HierDataset& ds, const std::vector<double>& radii,
                               const PreserveConfig& pc = {}) {
  if (radii.empty()) throw DomainError("sweep: empty radius list");
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] < radii[i - 1])) throw DomainError("sweep: radii must be sorted descending");
  }
  auto set = prepare_sources(m, oracle, ds, pc);
  RadiusSweepReport rep;
  rep.seed = pc.seed;
  for (double r : radii) rep.rows.push_back(eval_at_radius(m, oracle, set, r, pc));
  return rep;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline void write_metrics_csv(const RadiusSweepReport& rep, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_metrics_csv: cannot open '" + path + "'");
  out << "radius,preservation,diversity,mean_embedding_radius\n";
  for (const auto& r : rep.rows) {
    out << fmt17(r.radius) << "," << fmt17(r.preservation) << "," << fmt17(r.diversity) << ","
        << fmt17(r.mean_embedding_radius) << "\n";
  }
  if (!out) throw IoError("write_metrics_csv: write failed for '" + path + "'");
}

inline std::string metrics_to_json(const RadiusSweepReport& rep, const RadiusStructure& rs,
                                   const std::string& config_hash) {
  std::ostringstream o;
  auto list = [&o](auto get, const RadiusSweepReport& r) {
    o << "[";
    for (std::size_t i = 0; i < r.rows.size(); ++i) o << (i ? ", " : "") << fmt17(get(r.rows[i]));
    o << "]";
  };
  o << "{\n\"radii\": ";
  list([](const SweepRow& r) { return r.radius; }, rep);
  o << ",\n\"preservation\": ";
  list([](const SweepRow& r) { return r.preservation; }, rep);
  o << ",\n\"diversity\": ";
  list([](const SweepRow& r) { return r.diversity; }, rep);
  o << ",\n\"radius_structure\": {\"mean_instance_radius\": " << fmt17(rs.mean_instance_radius)
    << ", \"mean_same_class_midpoint_radius\": " << fmt17(rs.mean_same_class_midpoint_radius)
    << ", \"mean_cross_super_midpoint_radius\": " << fmt17(rs.mean_cross_super_midpoint_radius)
    << ", \"classes\": {";
  std::size_t left = rs.class_instance_radius.size();
  for (const auto& [c, v] : rs.class_instance_radius) {
    o << "\"" << c << "\": {\"instance_radius\": " << fmt17(v);
    auto it = rs.class_midpoint_radius.find(c);
    if (it != rs.class_midpoint_radius.end()) {
      o << ", \"midpoint_radius\": " << fmt17(it->second);
    }
    o << "}" << (--left ? ", " : "");
  }
  o << "}},\n\"seed\": " << rep.seed << ",\n\"config_hash\": \"" << config_hash << "\"\n}\n";
  return o.str();
}

inline void write_metrics_json(const RadiusSweepReport& rep, const RadiusStructure& rs,
                               const std::string& config_hash, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_metrics_json: cannot open '" + path + "'");
  out << metrics_to_json(rep, rs, config_hash);
  if (!out) throw IoError("write_metrics_json: write failed for '" + path + "'");
}

}  // namespace eval
}  // namespace hyperlat
