#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "hyperlat/edit.hpp"
#include "hyperlat/rng.hpp"

using namespace hyperlat;
using Catch::Matchers::WithinAbs;

namespace {

// Random point at a prescribed hyperbolic radius.
Vec<double> point_at_radius(rng::Stream& s, std::size_t dim, double r, const geom::Ball& B) {
  auto dir = s.unit_vector(dim);
  double norm = std::tanh(B.sqrtc() * r / 2.0) / B.sqrtc();
  return vscale(norm, dir);
}

Vec<double> unit(const Vec<double>& v) { return vscale(1.0 / vnorm(v), v); }

}  // namespace

TEST_CASE("interpolate endpoints and degenerate cases are exact", "[edit]") {
  geom::Ball B{};
  rng::Stream s(101);
  auto zi = point_at_radius(s, 8, 1.7, B);
  auto zj = point_at_radius(s, 8, 2.4, B);

  auto two = edit::interpolate(zi, zj, 2, B);
  REQUIRE(two.size() == 2);
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(two[0][j] == zi[j]);
    CHECK(two[1][j] == zj[j]);
  }

  auto constant = edit::interpolate(zi, zi, 5, B);
  for (const auto& p : constant) {
    for (std::size_t j = 0; j < 8; ++j) CHECK(p[j] == zi[j]);
  }

  CHECK_THROWS_AS(edit::interpolate(zi, zj, 1, B), DomainError);
  CHECK_THROWS_AS(edit::interpolate(zi, Vec<double>(4, 0.1), 3, B), DimensionError);
}

TEST_CASE("interpolate moves at constant hyperbolic speed", "[edit]") {
  geom::Ball B{1.0, 1e-5};
  rng::Stream s(2024);
  for (int rep = 0; rep < 20; ++rep) {
    auto zi = point_at_radius(s, 8, s.uniform(0.2, 2.5), B);
    auto zj = point_at_radius(s, 8, s.uniform(0.2, 2.5), B);
    const std::size_t steps = 7;
    auto path = edit::interpolate(zi, zj, steps, B);
    double total = geom::distance(zi, zj, B);
    for (std::size_t k = 0; k + 1 < steps; ++k) {
      double leg = geom::distance(path[k], path[k + 1], B);
      CHECK_THAT(leg, WithinAbs(total / double(steps - 1), 1e-8));
    }
  }
}

TEST_CASE("geodesic perturbation honors its endpoint contracts", "[edit]") {
  geom::Ball B{};
  rng::Stream s(7);
  auto z = point_at_radius(s, 6, 2.0, B);
  std::vector<Vec<double>> pool{point_at_radius(s, 6, 1.1, B)};
  const double r = 2.5;

  auto at0 = edit::perturb_geodesic(z, pool, edit::PerturbSpec::geodesic(r, 0.0, 3), B);
  auto zr = geom::rescale_to_radius(z, r, B);
  for (std::size_t j = 0; j < 6; ++j) CHECK(at0[j] == zr[j]);

  auto at1 = edit::perturb_geodesic(z, pool, edit::PerturbSpec::geodesic(r, 1.0, 3), B);
  auto ref_r = geom::rescale_to_radius(pool[0], r, B);
  for (std::size_t j = 0; j < 6; ++j) CHECK(at1[j] == ref_r[j]);

  auto a = edit::perturb_geodesic(z, pool, edit::PerturbSpec::geodesic(r, 0.4, 9), B);
  auto b = edit::perturb_geodesic(z, pool, edit::PerturbSpec::geodesic(r, 0.4, 9), B);
  for (std::size_t j = 0; j < 6; ++j) CHECK(a[j] == b[j]);
}

TEST_CASE("geodesic midpoints contract toward the origin", "[edit]") {
  geom::Ball B{};
  rng::Stream s(31);
  const double r = 3.0;
  std::size_t strict = 0;
  for (int rep = 0; rep < 50; ++rep) {
    auto z = point_at_radius(s, 8, s.uniform(0.5, 4.0), B);
    std::vector<Vec<double>> pool;
    for (int i = 0; i < 5; ++i) pool.push_back(point_at_radius(s, 8, s.uniform(0.5, 4.0), B));
    auto spec = edit::PerturbSpec::geodesic(r, 0.5, std::uint64_t(rep));
    auto mid = edit::perturb_geodesic(z, pool, spec, B);
    double rad = geom::radius_of(mid, B);
    CHECK(rad <= r + 1e-12);
    if (rad < r - 1e-9) ++strict;
  }
  CHECK(strict >= 45);  // ties need exactly coincident rescaled endpoints
}

TEST_CASE("geodesic perturbation rejects bad inputs", "[edit]") {
  geom::Ball B{};
  rng::Stream s(5);
  auto z = point_at_radius(s, 4, 1.0, B);
  std::vector<Vec<double>> pool{point_at_radius(s, 4, 1.0, B)};

  CHECK_THROWS_AS(edit::perturb_geodesic(z, {}, edit::PerturbSpec::geodesic(1.0, 0.2, 1), B),
                  DomainError);
  CHECK_THROWS_AS(
      edit::perturb_geodesic(Vec<double>(4, 0.0), pool, edit::PerturbSpec::geodesic(1.0, 0.2, 1), B),
      DomainError);
  CHECK_THROWS_AS(edit::perturb_geodesic(z, pool, edit::PerturbSpec::tangent(1.0, 0.5, 1), B),
                  DomainError);
  CHECK_THROWS_AS(edit::perturb_geodesic(z, pool, edit::PerturbSpec::geodesic(1e9, 0.2, 1), B),
                  DomainError);
  CHECK_THROWS_AS(edit::perturb_geodesic(z, pool, edit::PerturbSpec::geodesic(1.0, 1.5, 1), B),
                  DomainError);
}

TEST_CASE("tangent perturbation rescales, preserves collinear directions", "[edit]") {
  geom::Ball B{};
  rng::Stream s(77);
  auto z = point_at_radius(s, 8, 1.4, B);
  const double r = 2.2;

  auto pure = edit::perturb_tangent(z, edit::make_direction(z), 0.0, r, B);
  auto zr = geom::rescale_to_radius(z, r, B);
  for (std::size_t j = 0; j < 8; ++j) CHECK(pure[j] == zr[j]);

  // Tangent step along the point's own direction leaves the direction alone.
  auto along = edit::make_direction(geom::log_map_origin(z, B));
  auto moved = edit::perturb_tangent(z, along, 0.8, r, B);
  auto u_before = unit(z);
  auto u_after = unit(moved);
  for (std::size_t j = 0; j < 8; ++j) CHECK_THAT(u_after[j], WithinAbs(u_before[j], 1e-12));

  auto again = edit::perturb_tangent(z, along, 0.8, r, B);
  for (std::size_t j = 0; j < 8; ++j) CHECK(again[j] == moved[j]);

  CHECK_THAT(geom::radius_of(moved, B), WithinAbs(r, 1e-10));

  edit::EditDirection skew{vscale(1.3, along.u)};
  CHECK_THROWS_AS(edit::perturb_tangent(z, skew, 0.5, r, B), DomainError);
  CHECK_THROWS_AS(edit::perturb_tangent(Vec<double>(8, 0.0), along, 0.5, r, B), DomainError);
  CHECK_THROWS_AS(edit::perturb_tangent(z, along, 0.5, -1.0, B), DomainError);
}

TEST_CASE("transfer applies one edit across many codes", "[edit]") {
  geom::Ball B{};
  rng::Stream s(13);
  auto dir = edit::make_direction(s.normals(6));
  const double r = 1.8;
  std::vector<Vec<double>> codes;
  for (int i = 0; i < 9; ++i) codes.push_back(point_at_radius(s, 6, s.uniform(0.3, 3.0), B));

  auto out = edit::transfer_edit(dir, 0.6, r, codes, B);
  REQUIRE(out.size() == codes.size());
  for (const auto& z : out) {
    CHECK_THAT(geom::radius_of(z, B), WithinAbs(r, 1e-8));
    CHECK(vnorm(z) * B.sqrtc() < 1.0);
  }

  auto single = edit::transfer_edit(dir, 0.6, r, {codes[0]}, B);
  auto direct = edit::perturb_tangent(codes[0], dir, 0.6, r, B);
  for (std::size_t j = 0; j < 6; ++j) CHECK(single[0][j] == direct[j]);

  CHECK_THROWS_AS(edit::transfer_edit(dir, 0.6, r, {}, B), DomainError);
}

TEST_CASE("direction construction normalizes and rejects zero", "[edit]") {
  auto d = edit::make_direction(Vec<double>{3.0, 4.0});
  CHECK_THAT(vnorm(d.u), WithinAbs(1.0, 1e-12));
  CHECK_THAT(d.u[0], WithinAbs(0.6, 1e-15));
  CHECK_THAT(d.u[1], WithinAbs(0.8, 1e-15));
  CHECK_NOTHROW(edit::check_direction(d));
  CHECK_THROWS_AS(edit::make_direction(Vec<double>(3, 0.0)), DomainError);
}

TEST_CASE("trajectory csv writes the documented layout", "[edit]") {
  auto path = (std::filesystem::temp_directory_path() / "hyperlat_test_traj.csv").string();
  std::vector<edit::TrajectoryRow> rows{
      {0, 0.0, {0.1, -0.25}},
      {0, 0.5, {0.125, 0.0625}},
  };
  edit::write_codes_csv(rows, 2, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "id,t_or_step,z0,z1");
  REQUIRE(std::getline(in, line));
  {
    std::istringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    CHECK(tok == "0");
    std::getline(ss, tok, ',');
    CHECK(std::strtod(tok.c_str(), nullptr) == 0.0);
    std::getline(ss, tok, ',');
    CHECK(std::strtod(tok.c_str(), nullptr) == 0.1);
    std::getline(ss, tok, ',');
    CHECK(std::strtod(tok.c_str(), nullptr) == -0.25);
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(edit::write_codes_csv({{0, 0.0, {1.0}}}, 2, path), DimensionError);
}
