// hyperlat command-line interface: dataset generation, training, editing,
// evaluation, plotting, and verification suites.
//
// Exit codes: 0 success, 1 validation or check failure, 2 usage error.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperlat/checks.hpp"
#include "hyperlat/common.hpp"
#include "hyperlat/data.hpp"
#include "hyperlat/edit.hpp"
#include "hyperlat/eval.hpp"
#include "hyperlat/model.hpp"
#include "hyperlat/plot.hpp"
#include "hyperlat/rng.hpp"
#include "hyperlat/train.hpp"

namespace {

using nlohmann::ordered_json;
using namespace hyperlat;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// Prints the resolved configuration as one JSON line with its hash; the hash
// covers everything printed before it, so identical lines mean identical runs.
std::string echo_config(ordered_json j) {
  const std::string hash = hex64(fnv1a64(j.dump()));
  j["config_hash"] = hash;
  std::cout << j.dump() << "\n";
  return hash;
}

// Replaces the final extension of `path` with `suffix` ("_history.csv", ...).
std::string sibling_path(const std::string& path, const std::string& suffix) {
  const std::size_t slash = path.find_last_of("/\\");
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return path + suffix;
  }
  return path.substr(0, dot) + suffix;
}

struct GlobalFlags {
  std::uint64_t seed = 20240817;
  std::string out;
  bool quiet = false;

  std::string out_or(const char* fallback) const { return out.empty() ? fallback : out; }
};

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataFlags {
  data::HierSpec spec;
};

int cmd_gen_data(const GlobalFlags& g, const GenDataFlags& f) {
  data::HierSpec spec = f.spec;
  spec.seed = g.seed;
  const std::string out = g.out_or("dataset.csv");
  echo_config({{"command", "gen-data"},
               {"flags",
                {{"n_super", spec.n_super},
                 {"classes_per_super", spec.classes_per_super},
                 {"per_class", spec.per_class},
                 {"dim", spec.dim},
                 {"gain_super", spec.gain_super},
                 {"gain_class", spec.gain_class},
                 {"gain_style", spec.gain_style},
                 {"sigma", spec.sigma},
                 {"n_unseen", spec.n_unseen}}},
               {"out", out},
               {"quiet", g.quiet},
               {"seed", g.seed}});
  auto ds = data::gen_hierarchy(spec);
  data::write_dataset(ds, out);
  std::cout << ds.samples.size() << " rows -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string data = "dataset.csv";
  std::size_t steps = 5000;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::size_t latent_dim = 16;
};

void write_history_csv(const std::vector<train::StepMetrics>& hist, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_history_csv: cannot open '" + path + "'");
  out << "step,l2,perceptual,latent_rec,hyper,total,lambda2_used\n";
  for (const auto& m : hist) {
    out << m.step << "," << fmt17(m.l2) << "," << fmt17(m.perceptual) << ","
        << fmt17(m.latent_rec) << "," << fmt17(m.hyper) << "," << fmt17(m.total) << ","
        << fmt17(m.lambda2_used) << "\n";
  }
  if (!out) throw IoError("write_history_csv: write failed for '" + path + "'");
}

int cmd_train(const GlobalFlags& g, const TrainFlags& f) {
  const std::string out = g.out_or("checkpoint.json");
  echo_config({{"command", "train"},
               {"flags",
                {{"data", f.data},
                 {"steps", f.steps},
                 {"lr", f.lr},
                 {"batch", f.batch},
                 {"latent_dim", f.latent_dim}}},
               {"out", out},
               {"quiet", g.quiet},
               {"seed", g.seed}});

  auto ds = data::read_dataset(f.data);
  auto label_map = data::seen_label_map(ds);
  model::Dims dims;
  dims.D = ds.dim;
  // The frozen backbone is full row rank, so its latent cannot exceed the
  // feature dimension; shrink it for small datasets.
  dims.d_w = std::min(dims.d_w, ds.dim);
  dims.n = f.latent_dim;
  dims.K = label_map.size();
  auto m0 = model::create(dims, geom::Ball{}, rng::derive(g.seed, "model"));

  train::TrainConfig cfg;
  cfg.steps = f.steps;
  cfg.batch_size = f.batch;
  cfg.learning_rate = f.lr;
  cfg.seed = g.seed;

  try {
    auto fr = train::fit(m0, ds, cfg);
    train::save_checkpoint(fr.checkpoint, out);
    write_history_csv(fr.history, sibling_path(out, "_history.csv"));
    if (!g.quiet) {
      const auto& h0 = fr.history.front();
      const auto& h1 = fr.history.back();
      std::cout << "trained " << cfg.steps << " steps: total " << fmt17(h0.total) << " -> "
                << fmt17(h1.total) << ", l2 " << fmt17(h0.l2) << " -> " << fmt17(h1.l2)
                << "\n";
    }
    std::cout << "checkpoint -> " << out << "\n";
    return 0;
  } catch (const train::DivergenceError& e) {
    // Salvage the last finite state so the run is inspectable.
    train::save_checkpoint(e.last_good, out);
    std::cerr << "error: " << e.what() << " (last good state at step "
              << e.last_good.step << " -> " << out << ")\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// edit
// ---------------------------------------------------------------------------

struct EditFlags {
  std::string ckpt = "checkpoint.json";
  std::string data = "dataset.csv";
  // interpolate
  std::size_t src = 0;
  std::size_t dst = 0;
  std::size_t steps = 8;
  // perturb
  double radius = 0.0;
  double t = 0.2;
  // transfer
  std::uint64_t direction_seed = 1;
  std::vector<std::size_t> ids;
  double s = 0.2;
};

void write_decoded_csv(const std::vector<edit::TrajectoryRow>& rows, std::size_t dim,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_decoded_csv: cannot open '" + path + "'");
  out << "id,t_or_step";
  for (std::size_t j = 0; j < dim; ++j) out << ",x" << j;
  out << "\n";
  for (const auto& row : rows) {
    if (row.z.size() != dim) throw DimensionError("write_decoded_csv: row dimension mismatch");
    out << row.id << "," << fmt17(row.t_or_step);
    for (double v : row.z) out << "," << fmt17(v);
    out << "\n";
  }
  if (!out) throw IoError("write_decoded_csv: write failed for '" + path + "'");
}

struct EditContext {
  model::HaeModel m;
  model::Nets<double> nets;
  data::HierDataset ds;
  std::map<std::size_t, std::size_t> by_id;  // sample id -> row index

  Vec<double> embed(std::size_t id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DomainError("unknown sample id " + std::to_string(id));
    }
    return model::encode(m, nets, ds.samples[it->second].x).z;
  }
};

EditContext load_edit_context(const std::string& ckpt_path, const std::string& data_path) {
  auto ck = train::load_checkpoint(ckpt_path);
  EditContext ctx{train::rebuild_model(ck), {}, data::read_dataset(data_path), {}};
  ctx.nets = model::build_nets<double>(ctx.m.dims, ctx.m.ball, ctx.m.params);
  for (std::size_t i = 0; i < ctx.ds.samples.size(); ++i) {
    ctx.by_id.emplace(ctx.ds.samples[i].id, i);
  }
  return ctx;
}

int cmd_edit(const GlobalFlags& g, const std::string& sub, const EditFlags& f) {
  const std::string out = g.out_or("codes.csv");
  ordered_json flags{{"ckpt", f.ckpt}, {"data", f.data}};
  if (sub == "interpolate") {
    flags["src"] = f.src;
    flags["dst"] = f.dst;
    flags["steps"] = f.steps;
  } else if (sub == "perturb") {
    flags["src"] = f.src;
    flags["radius"] = f.radius;
    flags["t"] = f.t;
  } else {
    flags["direction_seed"] = f.direction_seed;
    flags["ids"] = f.ids;
    flags["s"] = f.s;
    flags["radius"] = f.radius;
  }
  echo_config({{"command", "edit " + sub},
               {"flags", flags},
               {"out", out},
               {"quiet", g.quiet},
               {"seed", g.seed}});

  auto ctx = load_edit_context(f.ckpt, f.data);
  std::vector<edit::TrajectoryRow> rows;

  if (sub == "interpolate") {
    auto zi = ctx.embed(f.src);
    auto zj = ctx.embed(f.dst);
    auto path = edit::interpolate(zi, zj, f.steps, ctx.m.ball);
    for (std::size_t k = 0; k < path.size(); ++k) {
      rows.push_back({f.src, double(k) / double(f.steps - 1), std::move(path[k])});
    }
  } else if (sub == "perturb") {
    auto z = ctx.embed(f.src);
    std::vector<Vec<double>> pool;
    for (const auto& smp : ctx.ds.samples) {
      if (smp.split == data::Split::kSeen) {
        pool.push_back(model::encode(ctx.m, ctx.nets, smp.x).z);
      }
    }
    auto spec = edit::PerturbSpec::geodesic(f.radius, f.t, rng::derive(g.seed, "edit/perturb"));
    rows.push_back({f.src, f.t, edit::perturb_geodesic(z, pool, spec, ctx.m.ball)});
  } else {
    auto dir_stream = rng::substream(f.direction_seed, "edit/direction");
    auto dir = edit::make_direction(dir_stream.normals(ctx.m.dims.n));
    std::vector<Vec<double>> codes;
    for (std::size_t id : f.ids) codes.push_back(ctx.embed(id));
    auto edited = edit::transfer_edit(dir, f.s, f.radius, codes, ctx.m.ball);
    for (std::size_t k = 0; k < edited.size(); ++k) {
      rows.push_back({f.ids[k], f.s, std::move(edited[k])});
    }
  }

  edit::write_codes_csv(rows, ctx.m.dims.n, out);
  std::vector<edit::TrajectoryRow> decoded;
  for (const auto& r : rows) {
    decoded.push_back({r.id, r.t_or_step, model::decode(ctx.m, ctx.nets, r.z).xhat});
  }
  const std::string dec_path = sibling_path(out, "_decoded.csv");
  write_decoded_csv(decoded, ctx.m.dims.D, dec_path);
  std::cout << rows.size() << " codes -> " << out << " (decoded -> " << dec_path << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalFlags {
  std::string ckpt = "checkpoint.json";
  std::string data = "dataset.csv";
  std::vector<double> radii;  // empty -> default ladder
  std::size_t sources = 32;
  std::size_t perturbations = 8;
  double t = 0.02;
};

int cmd_eval(const GlobalFlags& g, const EvalFlags& f) {
  const std::string out = g.out_or("metrics.json");
  const std::string hash =
      echo_config({{"command", "eval"},
                   {"flags",
                    {{"ckpt", f.ckpt},
                     {"data", f.data},
                     {"radii", f.radii},
                     {"sources", f.sources},
                     {"perturbations", f.perturbations},
                     {"t", f.t}}},
                   {"out", out},
                   {"quiet", g.quiet},
                   {"seed", g.seed}});

  auto ck = train::load_checkpoint(f.ckpt);
  auto m = train::rebuild_model(ck);
  auto ds = data::read_dataset(f.data);

  eval::OracleConfig oc;
  oc.seed = rng::derive(g.seed, "oracle");
  auto oracle = eval::train_oracle(ds, oc);

  std::vector<double> radii = f.radii.empty() ? eval::default_radii(m.ball) : f.radii;
  eval::PreserveConfig pc;
  pc.n_sources = f.sources;
  pc.n_perturbations = f.perturbations;
  pc.t = f.t;
  pc.seed = rng::derive(g.seed, "eval");

  auto rep = eval::sweep(m, oracle, ds, radii, pc);
  eval::RadiusStructureConfig rsc;
  rsc.seed = rng::derive(g.seed, "eval/structure");
  auto rs = eval::radius_structure(m, ds, rsc);

  eval::write_metrics_json(rep, rs, hash, out);
  const std::string csv_path = sibling_path(out, ".csv");
  eval::write_metrics_csv(rep, csv_path);

  if (!g.quiet) {
    std::cout << "oracle holdout accuracy " << fmt17(oracle.holdout_accuracy) << "\n";
    for (const auto& row : rep.rows) {
      std::cout << "radius " << fmt17(row.radius) << ": preservation "
                << fmt17(row.preservation) << ", diversity " << fmt17(row.diversity) << "\n";
    }
  }
  std::cout << rep.rows.size() << " radii -> " << out << " (csv -> " << csv_path << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

struct PlotFlags {
  std::string emb;
  bool geodesics = false;
  double size = 640.0;
};

int cmd_plot(const GlobalFlags& g, const PlotFlags& f) {
  const std::string out = g.out_or("plot.svg");
  echo_config({{"command", "plot"},
               {"flags", {{"emb", f.emb}, {"geodesics", f.geodesics}, {"size", f.size}}},
               {"out", out},
               {"quiet", g.quiet},
               {"seed", g.seed}});
  auto rows = plot::read_codes_csv(f.emb);
  plot::PlotConfig cfg;
  cfg.geodesics = f.geodesics;
  cfg.size_px = f.size;
  plot::write_svg(rows, geom::Ball{}, out, cfg);
  std::cout << rows.size() << " points -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckFlags {
  std::string suite;
  std::size_t pairs = 10000;
  std::size_t configs = 100;
  std::string fault;  // test fixture, hidden
};

int cmd_check(const GlobalFlags& g, const CheckFlags& f) {
  echo_config({{"command", "check"},
               {"flags",
                {{"suite", f.suite},
                 {"pairs", f.pairs},
                 {"configs", f.configs},
                 {"inject_fault", f.fault}}},
               {"out", g.out},
               {"quiet", g.quiet},
               {"seed", g.seed}});

  checks::SuiteReport rep;
  if (f.suite == "identities") {
    checks::IdentityOptions opt;
    opt.n_pairs = f.pairs;
    opt.seed = g.seed;
    opt.fault = checks::fault_from(f.fault);
    rep = checks::run_identity_suite(opt);
  } else {
    checks::GradOptions opt;
    opt.n_configs = f.configs;
    opt.seed = g.seed;
    if (checks::fault_from(f.fault) != checks::Fault::kNone) {
      throw DomainError("fault injection applies to the identities suite only");
    }
    rep = checks::run_grad_suite(opt);
  }

  if (!g.quiet) {
    for (const auto& l : rep.laws) {
      std::printf("  %-28s worst %.3e  tol %.0e  checks %zu  failures %zu\n", l.law.c_str(),
                  l.worst_err, l.tol, l.checks, l.failures);
    }
  }
  if (rep.pass()) {
    std::cout << "suite " << rep.suite << ": PASS (" << rep.checks << " checks)\n";
    return 0;
  }
  const auto& w = rep.worst();
  std::cout << "suite " << rep.suite << ": FAIL (" << rep.failures << " of " << rep.checks
            << " checks)\n";
  std::cout << "worst offender: " << w.law << " err " << fmt17(w.worst_err) << " tol "
            << fmt17(w.tol) << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperlat: hierarchy-aware latent editing on the Poincare ball"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--seed", g.seed, "Master seed; every derived stream is tagged from it");
  app.add_option("--out", g.out, "Output path (default depends on the subcommand)");
  app.add_flag("--quiet", g.quiet, "Suppress progress lines (config echo still printed)");

  GenDataFlags gd;
  auto* c_gen = app.add_subcommand("gen-data", "Generate the synthetic hierarchical dataset");
  c_gen->fallthrough();
  c_gen->add_option("--n-super", gd.spec.n_super, "Number of superclasses");
  c_gen->add_option("--classes-per-super", gd.spec.classes_per_super,
                    "Classes per superclass");
  c_gen->add_option("--per-class", gd.spec.per_class, "Instances per class");
  c_gen->add_option("--dim", gd.spec.dim, "Feature dimension");
  c_gen->add_option("--gain-super", gd.spec.gain_super, "Superclass direction gain");
  c_gen->add_option("--gain-class", gd.spec.gain_class, "Class direction gain");
  c_gen->add_option("--gain-style", gd.spec.gain_style, "Instance style gain");
  c_gen->add_option("--sigma", gd.spec.sigma, "Per-coordinate noise scale");
  c_gen->add_option("--n-unseen", gd.spec.n_unseen, "Classes held out as unseen");

  TrainFlags tf;
  auto* c_train = app.add_subcommand("train", "Train the editing model on a dataset");
  c_train->fallthrough();
  c_train->add_option("--data", tf.data, "Dataset CSV path");
  c_train->add_option("--steps", tf.steps, "Optimization steps");
  c_train->add_option("--lr", tf.lr, "Adam learning rate");
  c_train->add_option("--batch", tf.batch, "Minibatch size");
  c_train->add_option("--latent-dim", tf.latent_dim, "Ball dimension n (2 enables plotting)");

  EditFlags ef;
  auto* c_edit = app.add_subcommand("edit", "Edit latent codes from a trained checkpoint");
  c_edit->fallthrough();
  c_edit->require_subcommand(1);
  c_edit->add_option("--ckpt", ef.ckpt, "Checkpoint JSON path");
  c_edit->add_option("--data", ef.data, "Dataset CSV path");
  auto* c_interp = c_edit->add_subcommand("interpolate", "Geodesic interpolation between ids");
  c_interp->fallthrough();
  c_interp->add_option("--src", ef.src, "Source sample id")->required();
  c_interp->add_option("--dst", ef.dst, "Destination sample id")->required();
  c_interp->add_option("--steps", ef.steps, "Number of points including endpoints");
  auto* c_pert = c_edit->add_subcommand("perturb", "Geodesic perturbation toward the pool");
  c_pert->fallthrough();
  c_pert->add_option("--src", ef.src, "Source sample id")->required();
  c_pert->add_option("--radius", ef.radius, "Target radius")->required();
  c_pert->add_option("--t", ef.t, "Geodesic fraction in [0, 1]");
  auto* c_trans = c_edit->add_subcommand("transfer", "Apply one tangent edit to several ids");
  c_trans->fallthrough();
  c_trans->add_option("--direction-seed", ef.direction_seed, "Seed for the edit direction");
  c_trans->add_option("--ids", ef.ids, "Sample ids (comma separated)")
      ->required()
      ->delimiter(',');
  c_trans->add_option("--s", ef.s, "Tangent step magnitude");
  c_trans->add_option("--radius", ef.radius, "Target radius")->required();

  EvalFlags vf;
  auto* c_eval = app.add_subcommand("eval", "Radius sweep and hierarchy metrics");
  c_eval->fallthrough();
  c_eval->add_option("--ckpt", vf.ckpt, "Checkpoint JSON path");
  c_eval->add_option("--data", vf.data, "Dataset CSV path");
  c_eval->add_option("--radii", vf.radii, "Radii, descending (default r_max ladder)")
      ->delimiter(',');
  c_eval->add_option("--sources", vf.sources, "Source samples per radius");
  c_eval->add_option("--perturbations", vf.perturbations, "Perturbations per source");
  c_eval->add_option("--t", vf.t, "Geodesic fraction per perturbation");

  PlotFlags pf;
  auto* c_plot = app.add_subcommand("plot", "Render 2-d ball embeddings as SVG");
  c_plot->fallthrough();
  c_plot->add_option("--emb", pf.emb, "Codes CSV (from edit) with 2-d embeddings")
      ->required();
  c_plot->add_flag("--geodesics", pf.geodesics, "Draw geodesic polylines between codes");
  c_plot->add_option("--size", pf.size, "SVG side length in pixels");

  CheckFlags cf;
  auto* c_check = app.add_subcommand("check", "Run a verification suite");
  c_check->fallthrough();
  c_check->add_option("--suite", cf.suite, "Which suite to run")
      ->required()
      ->check(CLI::IsMember({"identities", "grads"}));
  c_check->add_option("--pairs", cf.pairs, "Random pairs for the identities suite");
  c_check->add_option("--configs", cf.configs, "Random configurations for the grads suite");
  c_check->add_option("--inject-fault", cf.fault)->group("");  // test fixture, hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_gen) return cmd_gen_data(g, gd);
    if (*c_train) return cmd_train(g, tf);
    if (*c_edit) {
      std::string sub = "interpolate";
      if (c_edit->got_subcommand(c_pert)) sub = "perturb";
      if (c_edit->got_subcommand(c_trans)) sub = "transfer";
      return cmd_edit(g, sub, ef);
    }
    if (*c_eval) return cmd_eval(g, vf);
    if (*c_plot) return cmd_plot(g, pf);
    if (*c_check) return cmd_check(g, cf);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;  // unreachable: a subcommand is required
}
