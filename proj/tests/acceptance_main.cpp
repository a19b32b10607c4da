// End-to-end acceptance battery.  Each criterion prints exactly one PASS/FAIL
// line with its measured numbers; the process exits 0 only if every line
// passed.  Runs from scratch (no fixtures) in well under the ctest timeout.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hyperlat/checks.hpp"
#include "hyperlat/data.hpp"
#include "hyperlat/edit.hpp"
#include "hyperlat/eval.hpp"
#include "hyperlat/model.hpp"
#include "hyperlat/train.hpp"

using namespace hyperlat;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t argmax(const Vec<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Scorecard {
  bool all_pass = true;

  void line(int k, const char* name, bool ok, const std::string& detail) {
    std::printf("criterion %d  %-22s %s  %s\n", k, name, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && ok;
  }
};

// Move the last `hold` seen instances of every seen class out of the training
// split and return their sample indices.
std::vector<std::size_t> hold_out_per_class(data::HierDataset& ds, std::size_t hold) {
  std::map<std::size_t, std::vector<std::size_t>> seen_by_class;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].split == data::Split::kSeen) {
      seen_by_class[ds.samples[i].class_label].push_back(i);
    }
  }
  std::vector<std::size_t> held;
  for (auto& [c, idx] : seen_by_class) {
    for (std::size_t k = idx.size() - std::min(hold, idx.size() - 1); k < idx.size(); ++k) {
      ds.samples[idx[k]].split = data::Split::kUnseen;
      held.push_back(idx[k]);
    }
  }
  return held;
}

model::HaeModel train_default(const data::HierDataset& ds, train::FitResult* out_fit = nullptr) {
  model::Dims dims;
  dims.K = data::seen_label_map(ds).size();
  auto m0 = model::create(dims, geom::Ball{}, rng::derive(20240817, "model"));
  train::TrainConfig tc;  // 5000 steps, batch 8, lr 1e-3
  auto fr = train::fit(m0, ds, tc);
  auto m = fr.model;
  if (out_fit) *out_fit = std::move(fr);
  return m;
}

}  // namespace

int main() {
  Scorecard card;

  // 1 — identity battery: 1e4 random pairs, dim 16, unit curvature, radius <= 6,
  //     every law to 1e-8, inside a 10 s budget.
  {
    auto t0 = Clock::now();
    auto rep = checks::run_identity_suite({});
    double el = seconds_since(t0);
    bool ok = rep.pass() && el <= 10.0;
    card.line(1, "geometry identities", ok,
              fmt("%zu checks, %zu failures, worst %s %.2e (tol %.0e), %.2f s", rep.checks,
                  rep.failures, rep.worst().law.c_str(), rep.worst().worst_err, rep.worst().tol,
                  el));
  }

  // 2 — closed-form oracles, each to 1e-9 relative.
  {
    geom::Ball U{1.0, 4e-3};
    Vec<double> a{0.3, 0.0}, b{0.4, 0.0}, h{0.5, 0.0}, o{0.0, 0.0};
    nn::Mlr<double> one;
    one.ball = U;
    one.q = Matrix<double>(1, 2);
    one.a = Matrix<double>(1, 2);
    one.a(0, 0) = 1.0;
    struct Form {
      const char* name;
      double got, want;
    } forms[] = {
        {"collinear add", geom::mobius_add(a, b, U)[0], 0.625},
        {"scalar double", geom::mobius_scalar_mul(2.0, h, U)[0], 0.8},
        {"origin distance", geom::distance(o, h, U), std::log(3.0)},
        {"mlr logit", nn::mlr_logits(one, h)[0], 2.0 * std::log(3.0)},
        {"radius clamp", U.max_radius(), std::log(499.0)},
    };
    double worst = 0.0;
    const char* worst_name = forms[0].name;
    for (const auto& f : forms) {
      double e = rel_err(f.got, f.want);
      if (e > worst) {
        worst = e;
        worst_name = f.name;
      }
    }
    bool ok = worst <= 1e-9 && rel_err(forms[4].got, 6.2126) < 1e-4;
    card.line(2, "closed-form oracles", ok, fmt("5 forms, worst %s rel %.2e", worst_name, worst));
  }

  // 3 — gradient battery: central differences (h = 1e-6) against the tape at
  //     relative tolerance 1e-4 over 100 random configurations.
  {
    auto rep = checks::run_grad_suite({});
    bool ok = rep.pass();
    card.line(3, "gradient checks", ok,
              fmt("%zu coordinates, %zu failures, worst %s rel %.2e", rep.checks, rep.failures,
                  rep.worst().law.c_str(), rep.worst().worst_err));
  }

  // Shared trained models: one with a per-class holdout (4), one on the full
  // default dataset (5, 6, 7).
  auto ds = data::gen_hierarchy({});

  // 4 — desk-scale training on the default config: accuracy on held-out
  //     instances of seen classes, reconstruction decay, wall clock.
  {
    auto held_ds = ds;
    auto held = hold_out_per_class(held_ds, 16);
    auto lm = data::seen_label_map(held_ds);
    auto t0 = Clock::now();
    train::FitResult fr;
    auto m = train_default(held_ds, &fr);
    double el = seconds_since(t0);
    auto nets = model::build_nets<double>(m.dims, m.ball, m.params);
    std::size_t hits = 0;
    for (std::size_t i : held) {
      const auto& s = held_ds.samples[i];
      auto z = model::encode(m, nets, s.x).z;
      if (argmax(model::classify(nets, z)) == lm.at(s.class_label)) ++hits;
    }
    double acc = double(hits) / double(held.size());
    double l2_0 = fr.history.front().l2;
    double l2_t = fr.history.back().l2;
    bool ok = acc >= 0.90 && l2_t <= 0.1 * l2_0 && el <= 600.0;
    card.line(4, "desk-scale training", ok,
              fmt("held-out acc %.4f (n=%zu), l2 %.3g -> %.3g (%.3fx), %.1f s", acc, held.size(),
                  l2_0, l2_t, l2_t / l2_0, el));
  }

  train::FitResult fr_full;
  auto m_full = train_default(ds, &fr_full);

  // 5 — radius ladder: same-class midpoints sit strictly inside the instances
  //     for at least 90% of classes.
  {
    auto rs = eval::radius_structure(m_full, ds);
    std::size_t below = 0, total = 0;
    for (const auto& [c, mid] : rs.class_midpoint_radius) {
      ++total;
      if (mid < rs.class_instance_radius.at(c)) ++below;
    }
    double frac = total ? double(below) / double(total) : 0.0;
    bool ok = total > 0 && frac >= 0.90;
    card.line(5, "midpoint contraction", ok,
              fmt("%zu/%zu classes, mean radius instance %.3f vs midpoint %.3f", below, total,
                  rs.mean_instance_radius, rs.mean_same_class_midpoint_radius));
  }

  // 6 — radius-sweep trend: preservation monotone non-increasing and diversity
  //     monotone non-decreasing across the 4-rung ladder, slack 0.03, with at
  //     least 256 perturbations per radius.
  {
    auto oracle = eval::train_oracle(ds, {});
    eval::PreserveConfig pc;  // 32 sources x 8 perturbations = 256 per radius
    auto rep = eval::sweep(m_full, oracle, ds, eval::default_radii(m_full.ball), pc);
    const double slack = 0.03;
    bool trend = true;
    for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
      if (rep.rows[i + 1].preservation > rep.rows[i].preservation + slack) trend = false;
      if (rep.rows[i + 1].diversity < rep.rows[i].diversity - slack) trend = false;
    }
    std::string p = "p=[", d = "d=[";
    for (const auto& r : rep.rows) {
      p += fmt("%.3f ", r.preservation);
      d += fmt("%.3f ", r.diversity);
    }
    p.back() = ']';
    d.back() = ']';
    bool ok = trend && pc.n_sources * pc.n_perturbations >= 256 && rep.rows.size() == 4;
    card.line(6, "radius-sweep trend", ok,
              fmt("%s %s, oracle holdout acc %.3f", p.c_str(), d.c_str(),
                  oracle.holdout_accuracy));
  }

  // 7 — editing contracts: exact interpolation endpoints, equal per-step
  //     distances, and radius-true tangent/transfer edits, all to 1e-8.
  {
    auto nets = model::build_nets<double>(m_full.dims, m_full.ball, m_full.params);
    auto zi = model::encode(m_full, nets, ds.samples[0].x).z;
    auto zj = model::encode(m_full, nets, ds.samples[300].x).z;
    auto path = edit::interpolate(zi, zj, 9, m_full.ball);
    bool endpoints = path.front() == zi && path.back() == zj;
    double dmin = 1e300, dmax = 0.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      double dk = geom::distance(path[k], path[k + 1], m_full.ball);
      dmin = std::min(dmin, dk);
      dmax = std::max(dmax, dk);
    }
    bool equal_steps = dmax - dmin <= 1e-8;

    auto st = rng::substream(20240817, "acceptance/direction");
    auto dir = edit::make_direction(st.normals(m_full.dims.n));
    double worst_r = 0.0;
    for (double r : {2.0, 4.5, 6.0}) {
      auto zp = edit::perturb_tangent(zi, dir, 0.3, r, m_full.ball);
      worst_r = std::max(worst_r, std::abs(geom::radius_of(zp, m_full.ball) - r));
    }
    std::vector<Vec<double>> codes{zi, zj, path[4]};
    for (const auto& ze : edit::transfer_edit(dir, 0.25, 3.7, codes, m_full.ball)) {
      worst_r = std::max(worst_r, std::abs(geom::radius_of(ze, m_full.ball) - 3.7));
    }
    bool ok = endpoints && equal_steps && worst_r <= 1e-8;
    card.line(7, "editing contracts", ok,
              fmt("endpoints %s, step spread %.2e, worst radius err %.2e",
                  endpoints ? "exact" : "DRIFTED", dmax - dmin, worst_r));
  }

  // 8 — determinism: the same seeds run twice produce byte-identical dataset,
  //     checkpoint, and metrics files (shortened training; determinism does not
  //     depend on the step count).
  {
    char tmpl[] = "/tmp/hyperlat_accept_XXXXXX";
    std::string base = mkdtemp(tmpl);
    auto pipeline = [&](const std::string& dir) {
      fs::create_directories(dir);
      auto d8 = data::gen_hierarchy({});
      data::write_dataset(d8, dir + "/dataset.csv");
      model::Dims dims;
      dims.K = data::seen_label_map(d8).size();
      auto m0 = model::create(dims, geom::Ball{}, rng::derive(20240817, "model"));
      train::TrainConfig tc;
      tc.steps = 200;
      auto fr = train::fit(m0, d8, tc);
      train::save_checkpoint(fr.checkpoint, dir + "/checkpoint.json");
      auto oracle = eval::train_oracle(d8, {});
      auto rep = eval::sweep(fr.model, oracle, d8, eval::default_radii(fr.model.ball), {});
      auto rs = eval::radius_structure(fr.model, d8);
      eval::write_metrics_json(rep, rs, "self-test", dir + "/metrics.json");
    };
    pipeline(base + "/run1");
    pipeline(base + "/run2");
    bool ok = true;
    std::string diffs;
    for (const char* f : {"dataset.csv", "checkpoint.json", "metrics.json"}) {
      auto a = read_file(base + "/run1/" + f);
      auto b = read_file(base + "/run2/" + f);
      if (a.empty() || a != b) {
        ok = false;
        diffs += std::string(diffs.empty() ? "" : ", ") + f;
      }
    }
    fs::remove_all(base);
    card.line(8, "determinism", ok,
              ok ? "dataset, checkpoint, metrics byte-identical across reruns"
                 : fmt("files differ: %s", diffs.c_str()));
  }

  std::printf("%s\n", card.all_pass ? "ALL CRITERIA PASS" : "FAILURES PRESENT");
  return card.all_pass ? 0 : 1;
}
