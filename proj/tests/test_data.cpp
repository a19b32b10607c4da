#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "hyperlat/data.hpp"
#include "hyperlat/vecmath.hpp"

using namespace hyperlat;
using data::HierDataset;
using data::HierSpec;
using data::Split;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<Vec<double>> class_centroids(const HierDataset& ds) {
  std::size_t n = data::n_classes(ds);
  std::vector<Vec<double>> cent(n, Vec<double>(ds.dim, 0.0));
  std::vector<std::size_t> count(n, 0);
  for (const auto& s : ds.samples) {
    for (std::size_t j = 0; j < ds.dim; ++j) cent[s.class_label][j] += s.x[j];
    ++count[s.class_label];
  }
  for (std::size_t c = 0; c < n; ++c) {
    for (auto& v : cent[c]) v /= double(count[c]);
  }
  return cent;
}

}  // namespace

TEST_CASE("default hierarchy has documented shape and holdout", "[data]") {
  HierSpec spec;
  auto ds = data::gen_hierarchy(spec);

  CHECK(ds.dim == 64);
  CHECK(ds.samples.size() == 2048);
  CHECK(data::n_classes(ds) == 16);

  auto held = data::unseen_classes(spec);
  REQUIRE(held == std::vector<std::size_t>{3, 7, 11, 15});

  // Rows come out ordered by (class, instance) with sequential ids.
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    CHECK(s.id == i);
    CHECK(s.class_label == i / spec.per_class);
    CHECK(s.super_label == s.class_label / spec.classes_per_super);
    bool unseen = std::binary_search(held.begin(), held.end(), s.class_label);
    CHECK(s.split == (unseen ? Split::kUnseen : Split::kSeen));
    CHECK(all_finite(s.x));
  }

  auto seen = data::seen_classes(ds);
  CHECK(seen.size() == 12);
  auto m = data::seen_label_map(ds);
  CHECK(m.size() == 12);
  CHECK(m.at(0) == 0);
  CHECK(m.at(4) == 3);   // classes 0,1,2,4,... densely renumbered
  CHECK(m.at(14) == 11);
}

TEST_CASE("zero noise and zero style collapse each class to one point", "[data]") {
  HierSpec spec;
  spec.per_class = 8;
  spec.sigma = 0.0;
  spec.gain_style = 0.0;
  auto ds = data::gen_hierarchy(spec);
  for (std::size_t c = 0; c < spec.n_classes(); ++c) {
    const auto& first = ds.samples[c * spec.per_class].x;
    for (std::size_t i = 1; i < spec.per_class; ++i) {
      const auto& other = ds.samples[c * spec.per_class + i].x;
      for (std::size_t j = 0; j < spec.dim; ++j) CHECK(other[j] == first[j]);
    }
  }
}

TEST_CASE("generation is deterministic in the seed", "[data]") {
  HierSpec spec;
  spec.per_class = 4;
  auto a = data::gen_hierarchy(spec);
  auto b = data::gen_hierarchy(spec);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    for (std::size_t j = 0; j < a.dim; ++j) CHECK(a.samples[i].x[j] == b.samples[i].x[j]);
  }

  spec.seed += 1;
  auto c = data::gen_hierarchy(spec);
  bool any_diff = false;
  for (std::size_t j = 0; j < a.dim; ++j) {
    if (c.samples[0].x[j] != a.samples[0].x[j]) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("csv roundtrip preserves every field bit for bit", "[data]") {
  HierSpec spec;
  spec.per_class = 6;
  spec.dim = 9;
  auto ds = data::gen_hierarchy(spec);
  auto path = temp_path("hyperlat_test_roundtrip.csv");
  data::write_dataset(ds, path);
  auto back = data::read_dataset(path);
  std::remove(path.c_str());

  REQUIRE(back.dim == ds.dim);
  REQUIRE(back.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(back.samples[i].id == ds.samples[i].id);
    CHECK(back.samples[i].super_label == ds.samples[i].super_label);
    CHECK(back.samples[i].class_label == ds.samples[i].class_label);
    CHECK(back.samples[i].split == ds.samples[i].split);
    for (std::size_t j = 0; j < ds.dim; ++j) {
      CHECK(back.samples[i].x[j] == ds.samples[i].x[j]);
    }
  }
}

TEST_CASE("csv parse errors name the offending row", "[data]") {
  auto path = temp_path("hyperlat_test_bad.csv");

  auto write_file = [&](const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
  };

  write_file("id,super,klass,split,f0\n0,0,0,seen,1.0\n");
  CHECK_THROWS_MATCHES(data::read_dataset(path), IoError,
                       MessageMatches(ContainsSubstring("malformed header")));

  write_file("id,super,class,split,f0,f1\n0,0,0,seen,1.0\n");
  CHECK_THROWS_MATCHES(data::read_dataset(path), IoError,
                       MessageMatches(ContainsSubstring("row 2")));

  write_file("id,super,class,split,f0\n0,0,0,seen,1.0\n1,0,0,sorta,2.0\n");
  CHECK_THROWS_MATCHES(data::read_dataset(path), IoError,
                       MessageMatches(ContainsSubstring("row 3") &&
                                      ContainsSubstring("split")));

  write_file("id,super,class,split,f0\n0,0,0,seen,halfway\n");
  CHECK_THROWS_MATCHES(data::read_dataset(path), IoError,
                       MessageMatches(ContainsSubstring("row 2") &&
                                      ContainsSubstring("bad number")));

  std::remove(path.c_str());
  CHECK_THROWS_AS(data::read_dataset(path), IoError);
}

TEST_CASE("classes are nearest-centroid separable", "[data]") {
  HierSpec spec;
  auto ds = data::gen_hierarchy(spec);
  auto cent = class_centroids(ds);

  std::size_t hits = 0;
  for (const auto& s : ds.samples) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < cent.size(); ++c) {
      double d = vnorm(vsub(s.x, cent[c]));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == s.class_label) ++hits;
  }
  double acc = double(hits) / double(ds.samples.size());
  CHECK(acc >= 0.99);
}

TEST_CASE("within-superclass centroids sit closer than cross-superclass ones",
          "[data]") {
  HierSpec spec;
  auto ds = data::gen_hierarchy(spec);
  auto cent = class_centroids(ds);

  std::vector<double> within;
  std::vector<double> between;
  for (std::size_t a = 0; a < cent.size(); ++a) {
    for (std::size_t b = a + 1; b < cent.size(); ++b) {
      double d = vnorm(vsub(cent[a], cent[b]));
      bool same_super = a / spec.classes_per_super == b / spec.classes_per_super;
      (same_super ? within : between).push_back(d);
    }
  }
  REQUIRE(within.size() == 24);
  REQUIRE(between.size() == 96);

  double mean_between = 0.0;
  for (double d : between) mean_between += d;
  mean_between /= double(between.size());

  std::size_t ok = 0;
  for (double d : within) {
    if (d < mean_between) ++ok;
  }
  CHECK(double(ok) / double(within.size()) >= 0.90);
}
