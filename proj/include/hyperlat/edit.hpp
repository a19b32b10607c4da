#pragma once

// Editing procedures on the ball: geodesic interpolation, radius-controlled
// perturbation, and transferable tangent edits.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "hyperlat/common.hpp"
#include "hyperlat/geometry.hpp"
#include "hyperlat/rng.hpp"
#include "hyperlat/vecmath.hpp"

namespace hyperlat {
namespace edit {

struct EditDirection {
  Vec<double> u;  // unit-norm tangent vector at the origin
};

inline void check_direction(const EditDirection& d) {
  double n = vnorm(d.u);
  if (std::abs(n - 1.0) > 1e-10) {
    throw DomainError("EditDirection: tangent must be unit norm (got " + fmt17(n) + ")");
  }
}

inline EditDirection make_direction(const Vec<double>& v) {
  double n = vnorm(v);
  if (n < 1e-12) throw DomainError("make_direction: zero vector has no direction");
  return EditDirection{vscale(1.0 / n, v)};
}

enum class PerturbMode { kGeodesic, kTangent };

struct PerturbSpec {
  double target_radius = 0.0;
  PerturbMode mode = PerturbMode::kGeodesic;
  double t = 0.2;  // geodesic fraction, used in kGeodesic mode
  double s = 0.0;  // tangent magnitude, used in kTangent mode
  std::uint64_t seed = 0;

  static PerturbSpec geodesic(double r, double t, std::uint64_t seed) {
    return PerturbSpec{r, PerturbMode::kGeodesic, t, 0.0, seed};
  }
  static PerturbSpec tangent(double r, double s, std::uint64_t seed) {
    return PerturbSpec{r, PerturbMode::kTangent, 0.0, s, seed};
  }

  void validate(const geom::Ball& B) const {
    if (!(target_radius >= 0.0) || target_radius > B.max_radius()) {
      throw DomainError("PerturbSpec: target_radius must lie in [0, " +
                        fmt17(B.max_radius()) + "]");
    }
    if (mode == PerturbMode::kGeodesic && !(t >= 0.0 && t <= 1.0)) {
      throw DomainError("PerturbSpec: geodesic fraction must lie in [0, 1]");
    }
    if (mode == PerturbMode::kTangent && !(s >= 0.0)) {
      throw DomainError("PerturbSpec: tangent magnitude must be >= 0");
    }
  }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline std::vector<Vec<double>> interpolate(const Vec<double>& zi, const Vec<double>& zj,
                                            std::size_t steps, const geom::Ball& B) {
  if (steps < 2) throw DomainError("interpolate: steps must be >= 2");
  if (zi.size() != zj.size()) throw DimensionError("interpolate: dimension mismatch");
  std::vector<Vec<double>> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    if (k == 0) {
      out.push_back(zi);  // endpoints exact by construction
    } else if (k == steps - 1) {
      out.push_back(zj);
    } else {
      double t = double(k) / double(steps - 1);
      out.push_back(geom::geodesic_point(zi, zj, t, B));
    }
  }
  return out;
}

inline Vec<double> perturb_geodesic(const Vec<double>& z, const std::vector<Vec<double>>& pool,
                                    const PerturbSpec& spec, const geom::Ball& B) {
  if (spec.mode != PerturbMode::kGeodesic) {
    throw DomainError("perturb_geodesic: spec mode is not geodesic");
  }
  spec.validate(B);
  if (pool.empty()) throw DomainError("perturb_geodesic: reference pool is empty");
  if (vnorm(z) < geom::kDirectionFloor) {
    throw DomainError("perturb_geodesic: z at the origin has no direction");
  }
  auto zr = geom::rescale_to_radius(z, spec.target_radius, B);
  auto st = rng::substream(spec.seed, "edit/pool");
  const auto& ref = pool[st.index(pool.size())];
  auto ref_r = geom::rescale_to_radius(ref, spec.target_radius, B);
  if (spec.t == 0.0) return zr;
  if (spec.t == 1.0) return ref_r;
  return geom::geodesic_point(zr, ref_r, spec.t, B);
}

inline Vec<double> perturb_tangent(const Vec<double>& z, const EditDirection& dir, double s,
                                   double r, const geom::Ball& B) {
  check_direction(dir);
  if (z.size() != dir.u.size()) throw DimensionError("perturb_tangent: dimension mismatch");
  if (vnorm(z) < geom::kDirectionFloor) {
    throw DomainError("perturb_tangent: z at the origin has no direction");
  }
  if (!(r >= 0.0) || r > B.max_radius()) {
    throw DomainError("perturb_tangent: target radius out of range");
  }
  if (s == 0.0) return geom::rescale_to_radius(z, r, B);
  auto v = vadd(geom::log_map_origin(z, B), vscale(s, dir.u));
  auto p = geom::exp_map_origin(v, B);
  return geom::rescale_to_radius(p, r, B);
}

inline std::vector<Vec<double>> transfer_edit(const EditDirection& dir, double s, double r,
                                              const std::vector<Vec<double>>& codes,
                                              const geom::Ball& B) {
  if (codes.empty()) throw DomainError("transfer_edit: empty code list");
  std::vector<Vec<double>> out;
  out.reserve(codes.size());
  for (const auto& z : codes) out.push_back(perturb_tangent(z, dir, s, r, B));
  return out;
}

// ---------------------------------------------------------------------------
// CSV export: id,t_or_step,z0..z{n-1}
// ---------------------------------------------------------------------------

struct TrajectoryRow {
  std::size_t id = 0;
  double t_or_step = 0.0;
  Vec<double> z;
};

inline void write_codes_csv(const std::vector<TrajectoryRow>& rows, std::size_t dim,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_codes_csv: cannot open '" + path + "'");
  out << "id,t_or_step";
  for (std::size_t j = 0; j < dim; ++j) out << ",z" << j;
  out << "\n";
  for (const auto& row : rows) {
    if (row.z.size() != dim) throw DimensionError("write_codes_csv: row dimension mismatch");
    out << row.id << "," << fmt17(row.t_or_step);
    for (double v : row.z) out << "," << fmt17(v);
    out << "\n";
  }
  if (!out) throw IoError("write_codes_csv: write failed for '" + path + "'");
}

}  // namespace edit
}  // namespace hyperlat
