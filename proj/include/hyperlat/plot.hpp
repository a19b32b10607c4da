#pragma once

// SVG rendering of 2-d ball embeddings: boundary circle, class-colored
// markers, and optional geodesic polylines between consecutive codes that
// share an id.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hyperlat/common.hpp"
#include "hyperlat/data.hpp"
#include "hyperlat/edit.hpp"
#include "hyperlat/geometry.hpp"

namespace hyperlat {
namespace plot {

inline constexpr std::array<const char*, 16> kPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
    "#98df8a", "#ff9896", "#c5b0d5", "#c49c94"};

inline const char* class_color(std::size_t k) { return kPalette[k % kPalette.size()]; }

struct PlotConfig {
  double size_px = 640.0;
  double margin_px = 24.0;
  double marker_px = 3.0;
  std::size_t geodesic_samples = 64;
  bool geodesics = false;
};

// Reads the codes CSV written by the edit module (header id,t_or_step,z0,..).
inline std::vector<edit::TrajectoryRow> read_codes_csv(const std::string& path,
                                                       std::size_t* dim_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_codes_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("read_codes_csv: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto head = data::detail::split_csv(line);
  if (head.size() < 3 || head[0] != "id" || head[1] != "t_or_step") {
    throw IoError("read_codes_csv: malformed header in '" + path + "'");
  }
  const std::size_t dim = head.size() - 2;
  for (std::size_t j = 0; j < dim; ++j) {
    if (head[2 + j] != "z" + std::to_string(j)) {
      throw IoError("read_codes_csv: malformed header in '" + path + "' (code columns)");
    }
  }

  std::vector<edit::TrajectoryRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = data::detail::split_csv(line);
    if (f.size() != 2 + dim) {
      throw IoError("codes row " + std::to_string(row) + ": expected " +
                    std::to_string(2 + dim) + " fields, got " + std::to_string(f.size()));
    }
    edit::TrajectoryRow r;
    r.id = data::detail::parse_index(f[0], row, "id");
    r.t_or_step = data::detail::parse_double(f[1], row);
    r.z.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) r.z[j] = data::detail::parse_double(f[2 + j], row);
    for (double v : r.z) {
      if (!std::isfinite(v)) {
        throw IoError("codes row " + std::to_string(row) + ": non-finite code value");
      }
    }
    rows.push_back(std::move(r));
  }
  if (dim_out) *dim_out = dim;
  return rows;
}

namespace detail {

inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

inline std::string render_svg(const std::vector<edit::TrajectoryRow>& rows,
                              const geom::Ball& B, const PlotConfig& cfg = {}) {
  for (const auto& r : rows) {
    if (r.z.size() != 2) {
      throw DomainError(
          "plot requires 2-dimensional embeddings (latent dimension n = 2); "
          "train a model with n = 2 to visualize the ball");
    }
  }
  const double cx = cfg.size_px / 2.0, cy = cfg.size_px / 2.0;
  const double scale = cfg.size_px / 2.0 - cfg.margin_px;
  // The ball's Euclidean extent is 1/sqrt(c); normalize so the boundary is the
  // unit circle of the drawing.  The origin lands exactly at the center.
  auto to_px_x = [&](double z0) { return cx + scale * B.sqrtc() * z0; };
  auto to_px_y = [&](double z1) { return cy - scale * B.sqrtc() * z1; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
      << detail::px(cfg.size_px) << "\" height=\"" << detail::px(cfg.size_px)
      << "\" viewBox=\"0 0 " << detail::px(cfg.size_px) << " " << detail::px(cfg.size_px)
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out << "<circle cx=\"" << detail::px(cx) << "\" cy=\"" << detail::px(cy) << "\" r=\""
      << detail::px(scale) << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n";

  if (cfg.geodesics) {
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      if (rows[i].id != rows[i + 1].id) continue;
      auto path = edit::interpolate(rows[i].z, rows[i + 1].z, cfg.geodesic_samples, B);
      out << "<polyline fill=\"none\" stroke=\"#999999\" stroke-width=\"1\" points=\"";
      for (std::size_t k = 0; k < path.size(); ++k) {
        if (k) out << " ";
        out << detail::px(to_px_x(path[k][0])) << "," << detail::px(to_px_y(path[k][1]));
      }
      out << "\"/>\n";
    }
  }

  for (const auto& r : rows) {
    out << "<circle cx=\"" << detail::px(to_px_x(r.z[0])) << "\" cy=\""
        << detail::px(to_px_y(r.z[1])) << "\" r=\"" << detail::px(cfg.marker_px)
        << "\" fill=\"" << class_color(r.id) << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

inline void write_svg(const std::vector<edit::TrajectoryRow>& rows, const geom::Ball& B,
                      const std::string& path, const PlotConfig& cfg = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_svg: cannot open '" + path + "'");
  out << render_svg(rows, B, cfg);
  if (!out) throw IoError("write_svg: write failed for '" + path + "'");
}

}  // namespace plot
}  // namespace hyperlat
