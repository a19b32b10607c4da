#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "hyperlat/eval.hpp"

using namespace hyperlat;
using Catch::Matchers::WithinAbs;

namespace {

model::Dims tiny_dims() {
  model::Dims d;
  d.D = 8;
  d.d_w = 6;
  d.d_z = 4;
  d.n = 4;
  d.enc_hidden = {6};
  d.dec_hidden = {6};
  d.probe_dim = 5;
  d.K = 3;
  return d;
}

data::HierSpec tiny_data_spec() {
  data::HierSpec s;
  s.n_super = 2;
  s.classes_per_super = 2;
  s.per_class = 16;
  s.dim = 8;
  s.n_unseen = 1;
  s.seed = 7;
  return s;
}

eval::OracleConfig tiny_oracle_cfg() {
  eval::OracleConfig c;
  c.hidden = {12};
  c.steps = 150;
  c.batch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("diversity proxy closed forms", "[eval]") {
  std::vector<Vec<double>> same{{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
  CHECK(eval::diversity_proxy(same) == 0.0);

  std::vector<Vec<double>> pair{{0.0, 0.0}, {3.0, 4.0}};
  CHECK(eval::diversity_proxy(pair) == 5.0);

  std::vector<Vec<double>> abc{{0.0}, {1.0}, {3.0}};
  double fwd = eval::diversity_proxy(abc);
  std::vector<Vec<double>> cba{{3.0}, {0.0}, {1.0}};
  CHECK(eval::diversity_proxy(cba) == fwd);
  CHECK_THAT(fwd, WithinAbs(2.0, 1e-15));  // (1 + 3 + 2) / 3

  CHECK_THROWS_AS(eval::diversity_proxy({{1.0}}), DomainError);
  CHECK_THROWS_AS(eval::diversity_proxy({}), DomainError);
}

TEST_CASE("oracle reaches perfect accuracy on noise-free data", "[eval]") {
  auto spec = tiny_data_spec();
  spec.sigma = 0.0;
  auto ds = data::gen_hierarchy(spec);
  auto oc = eval::train_oracle(ds, tiny_oracle_cfg());
  CHECK(oc.n_classes == 4);
  CHECK(oc.holdout_accuracy == 1.0);

  // Same seed, same oracle, bit for bit.
  auto oc2 = eval::train_oracle(ds, tiny_oracle_cfg());
  REQUIRE(oc2.net.layers.size() == oc.net.layers.size());
  for (std::size_t l = 0; l < oc.net.layers.size(); ++l) {
    for (std::size_t i = 0; i < oc.net.layers[l].W.a.size(); ++i) {
      CHECK(oc2.net.layers[l].W.a[i] == oc.net.layers[l].W.a[i]);
    }
  }
}

TEST_CASE("oracle separates the default hierarchy", "[eval][slow]") {
  auto ds = data::gen_hierarchy(data::HierSpec{});
  auto oc = eval::train_oracle(ds);
  CHECK(oc.n_classes == 16);
  CHECK(oc.holdout_accuracy >= 0.99);
}

TEST_CASE("unmodified codes at their own radius preserve their label", "[eval]") {
  auto ds = data::gen_hierarchy(tiny_data_spec());
  auto m = model::create(tiny_dims(), geom::Ball{}, 31);
  auto oc = eval::train_oracle(ds, tiny_oracle_cfg());

  eval::PreserveConfig pc;
  pc.n_sources = 12;
  pc.n_perturbations = 4;
  pc.t = 0.0;
  auto set = eval::prepare_sources(m, oc, ds, pc);

  // Pin every source to one shared radius and refresh its reference label.
  const double r = 1.5;
  auto nets = model::build_nets<double>(m.dims, m.ball, m.params);
  for (auto& src : set.sources) {
    src.z = geom::rescale_to_radius(src.z, r, m.ball);
    src.label = eval::oracle_label(oc, model::decode(m, nets, src.z).xhat);
  }
  set.pool.clear();
  for (auto& src : set.sources) set.pool.push_back(src.z);

  auto row = eval::eval_at_radius(m, oc, set, r, pc);
  CHECK(row.preservation == 1.0);
  CHECK_THAT(row.mean_embedding_radius, WithinAbs(r, 1e-10));
}

TEST_CASE("radius structure is finite and tracks class membership", "[eval]") {
  auto ds = data::gen_hierarchy(tiny_data_spec());
  auto m = model::create(tiny_dims(), geom::Ball{}, 31);
  auto rs = eval::radius_structure(m, ds);

  CHECK(std::isfinite(rs.mean_instance_radius));
  CHECK(rs.mean_instance_radius > 0.0);
  CHECK(std::isfinite(rs.mean_same_class_midpoint_radius));
  CHECK(std::isfinite(rs.mean_cross_super_midpoint_radius));
  CHECK(rs.class_instance_radius.size() == 4);
  CHECK(rs.class_midpoint_radius.size() == 4);

  // A single-sample class has no midpoints: absent, not zero.
  data::HierDataset trimmed;
  trimmed.dim = ds.dim;
  bool kept_one_of_class0 = false;
  for (const auto& s : ds.samples) {
    if (s.class_label == 0) {
      if (kept_one_of_class0) continue;
      kept_one_of_class0 = true;
    }
    trimmed.samples.push_back(s);
  }
  auto rs2 = eval::radius_structure(m, trimmed);
  CHECK(rs2.class_instance_radius.count(0) == 1);
  CHECK(rs2.class_midpoint_radius.count(0) == 0);
  CHECK(rs2.class_midpoint_radius.count(1) == 1);
}

TEST_CASE("sweep validates input and reports deterministic rows", "[eval]") {
  auto ds = data::gen_hierarchy(tiny_data_spec());
  auto m = model::create(tiny_dims(), geom::Ball{}, 31);
  auto oc = eval::train_oracle(ds, tiny_oracle_cfg());
  eval::PreserveConfig pc;
  pc.n_sources = 8;
  pc.n_perturbations = 4;

  CHECK_THROWS_AS(eval::sweep(m, oc, ds, {}, pc), DomainError);
  CHECK_THROWS_AS(eval::sweep(m, oc, ds, {1.0, 2.0}, pc), DomainError);

  auto rep = eval::sweep(m, oc, ds, {2.0, 1.4}, pc);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    CHECK(row.preservation >= 0.0);
    CHECK(row.preservation <= 1.0);
    CHECK(row.diversity >= 0.0);
    // geodesic steps land inside the target sphere, never outside it
    CHECK(row.mean_embedding_radius <= row.radius + 1e-10);
    CHECK(row.mean_embedding_radius > 0.5 * row.radius);
  }
  CHECK(rep.rows[0].radius == 2.0);
  CHECK(rep.rows[1].radius == 1.4);

  auto rep2 = eval::sweep(m, oc, ds, {2.0, 1.4}, pc);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].preservation == rep2.rows[i].preservation);
    CHECK(rep.rows[i].diversity == rep2.rows[i].diversity);
  }

  auto one = eval::sweep(m, oc, ds, {1.0}, pc);
  CHECK(one.rows.size() == 1);
}

TEST_CASE("metrics exports carry the documented layout", "[eval]") {
  eval::RadiusSweepReport rep;
  rep.seed = 42;
  rep.rows = {{3.0, 0.9, 0.5, 3.0}, {2.0, 0.8, 0.75, 2.0}};
  eval::RadiusStructure rs;
  rs.mean_instance_radius = 2.5;
  rs.mean_same_class_midpoint_radius = 2.1;
  rs.mean_cross_super_midpoint_radius = 1.2;
  rs.class_instance_radius = {{0, 2.4}, {1, 2.6}};
  rs.class_midpoint_radius = {{0, 2.0}};

  auto jpath = (std::filesystem::temp_directory_path() / "hyperlat_test_metrics.json").string();
  auto cpath = (std::filesystem::temp_directory_path() / "hyperlat_test_metrics.csv").string();
  eval::write_metrics_json(rep, rs, "abc123", jpath);
  eval::write_metrics_csv(rep, cpath);

  std::ifstream jin(jpath);
  nlohmann::json j;
  jin >> j;
  CHECK(j.at("radii").get<std::vector<double>>() == std::vector<double>{3.0, 2.0});
  CHECK(j.at("preservation").get<std::vector<double>>() == std::vector<double>{0.9, 0.8});
  CHECK(j.at("diversity").get<std::vector<double>>() == std::vector<double>{0.5, 0.75});
  CHECK(j.at("seed").get<std::uint64_t>() == 42);
  CHECK(j.at("config_hash").get<std::string>() == "abc123");
  const auto& s = j.at("radius_structure");
  CHECK(s.at("mean_instance_radius").get<double>() == 2.5);
  CHECK(s.at("classes").at("0").at("midpoint_radius").get<double>() == 2.0);
  CHECK(s.at("classes").at("1").contains("midpoint_radius") == false);

  std::ifstream cin_(cpath);
  std::string line;
  REQUIRE(std::getline(cin_, line));
  CHECK(line == "radius,preservation,diversity,mean_embedding_radius");
  std::size_t rows = 0;
  while (std::getline(cin_, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 2);
  std::remove(jpath.c_str());
  std::remove(cpath.c_str());
}
