#pragma once

// Synthetic two-level hierarchy (superclass -> class -> instance) and CSV I/O.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "hyperlat/common.hpp"
#include "hyperlat/rng.hpp"
#include "hyperlat/vecmath.hpp"

namespace hyperlat {
namespace data {

struct HierSpec {
  std::size_t n_super = 4;
  std::size_t classes_per_super = 4;
  std::size_t per_class = 128;
  std::size_t dim = 64;
  double gain_super = 1.0;
  double gain_class = 0.5;
  double gain_style = 0.25;
  double sigma = 0.02;
  std::size_t n_unseen = 4;
  std::uint64_t seed = 20240817;

  std::size_t n_classes() const { return n_super * classes_per_super; }

  void validate() const {
    if (n_super < 1 || classes_per_super < 1 || per_class < 1 || dim < 1) {
      throw DomainError("HierSpec: all counts must be at least 1");
    }
    if (n_unseen >= n_classes()) {
      throw DomainError("HierSpec: unseen classes must leave at least one seen class");
    }
  }
};

enum class Split { kSeen, kUnseen };

inline const char* split_name(Split s) { return s == Split::kSeen ? "seen" : "unseen"; }

inline Split split_from(const std::string& tok, std::size_t row) {
  if (tok == "seen") return Split::kSeen;
  if (tok == "unseen") return Split::kUnseen;
  throw IoError("dataset row " + std::to_string(row) + ": unknown split token '" + tok + "'");
}

struct Sample {
  std::size_t id = 0;
  std::size_t super_label = 0;
  std::size_t class_label = 0;
  Split split = Split::kSeen;
  Vec<double> x;
};

struct HierDataset {
  std::size_t dim = 0;
  std::vector<Sample> samples;
};

// The last class slot of each superclass, cycling over superclasses, is held
// out; defaults give classes {3, 7, 11, 15}.
inline std::vector<std::size_t> unseen_classes(const HierSpec& spec) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < spec.n_unseen; ++k) {
    std::size_t super = k % spec.n_super;
    std::size_t slot = spec.classes_per_super - 1 - k / spec.n_super;
    out.push_back(super * spec.classes_per_super + slot);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline HierDataset gen_hierarchy(const HierSpec& spec) {
  spec.validate();
  auto held_out = unseen_classes(spec);
  auto is_unseen = [&](std::size_t c) {
    return std::binary_search(held_out.begin(), held_out.end(), c);
  };

  std::vector<Vec<double>> supers;
  for (std::size_t s = 0; s < spec.n_super; ++s) {
    auto st = rng::substream(spec.seed, "super/" + std::to_string(s));
    supers.push_back(st.unit_vector(spec.dim));
  }

  HierDataset ds;
  ds.dim = spec.dim;
  ds.samples.reserve(spec.n_classes() * spec.per_class);
  for (std::size_t c = 0; c < spec.n_classes(); ++c) {
    std::size_t super = c / spec.classes_per_super;
    auto ct = rng::substream(spec.seed, "class/" + std::to_string(c));
    auto u_class = ct.unit_vector(spec.dim);
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      auto it = rng::substream(spec.seed,
                               "sample/" + std::to_string(c) + "/" + std::to_string(i));
      auto v = it.unit_vector(spec.dim);
      Sample smp;
      smp.id = c * spec.per_class + i;
      smp.super_label = super;
      smp.class_label = c;
      smp.split = is_unseen(c) ? Split::kUnseen : Split::kSeen;
      smp.x.resize(spec.dim);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        smp.x[j] = spec.gain_super * supers[super][j] + spec.gain_class * u_class[j] +
                   spec.gain_style * v[j] + spec.sigma * it.normal();
      }
      ds.samples.push_back(std::move(smp));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV I/O: header id,super,class,split,f0..f{D-1}; 17 significant digits; LF.
// ---------------------------------------------------------------------------

inline void write_dataset(const HierDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_dataset: cannot open '" + path + "'");
  out << "id,super,class,split";
  for (std::size_t j = 0; j < ds.dim; ++j) out << ",f" << j;
  out << "\n";
  for (const auto& s : ds.samples) {
    out << s.id << "," << s.super_label << "," << s.class_label << ","
        << split_name(s.split);
    for (double v : s.x) out << "," << fmt17(v);
    out << "\n";
  }
  if (!out) throw IoError("write_dataset: write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::size_t parse_index(const std::string& tok, std::size_t row, const char* what) {
  char* end = nullptr;
  unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (tok.empty() || end != tok.c_str() + tok.size()) {
    throw IoError("dataset row " + std::to_string(row) + ": bad " + what + " '" + tok + "'");
  }
  return std::size_t(v);
}

inline double parse_double(const std::string& tok, std::size_t row) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size()) {
    throw IoError("dataset row " + std::to_string(row) + ": bad number '" + tok + "'");
  }
  return v;
}

}  // namespace detail

inline HierDataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_dataset: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("read_dataset: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto head = detail::split_csv(line);
  if (head.size() < 5 || head[0] != "id" || head[1] != "super" || head[2] != "class" ||
      head[3] != "split") {
    throw IoError("read_dataset: malformed header in '" + path + "'");
  }
  const std::size_t dim = head.size() - 4;
  for (std::size_t j = 0; j < dim; ++j) {
    if (head[4 + j] != "f" + std::to_string(j)) {
      throw IoError("read_dataset: malformed header in '" + path + "' (feature columns)");
    }
  }

  HierDataset ds;
  ds.dim = dim;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 4 + dim) {
      throw IoError("dataset row " + std::to_string(row) + ": expected " +
                    std::to_string(4 + dim) + " fields, got " + std::to_string(f.size()));
    }
    Sample s;
    s.id = detail::parse_index(f[0], row, "id");
    s.super_label = detail::parse_index(f[1], row, "super label");
    s.class_label = detail::parse_index(f[2], row, "class label");
    s.split = split_from(f[3], row);
    s.x.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) s.x[j] = detail::parse_double(f[4 + j], row);
    if (!all_finite(s.x)) {
      throw IoError("dataset row " + std::to_string(row) + ": non-finite feature");
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Label utilities
// ---------------------------------------------------------------------------

inline std::size_t n_classes(const HierDataset& ds) {
  std::size_t n = 0;
  for (auto& s : ds.samples) n = std::max(n, s.class_label + 1);
  return n;
}

inline std::vector<std::size_t> seen_classes(const HierDataset& ds) {
  std::vector<std::size_t> out;
  for (auto& s : ds.samples) {
    if (s.split == Split::kSeen) out.push_back(s.class_label);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Dense relabeling of the seen classes (training targets 0..K-1).
inline std::map<std::size_t, std::size_t> seen_label_map(const HierDataset& ds) {
  std::map<std::size_t, std::size_t> m;
  for (std::size_t c : seen_classes(ds)) m.emplace(c, m.size());
  return m;
}

inline std::vector<std::size_t> class_indices(const HierDataset& ds, std::size_t c) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].class_label == c) out.push_back(i);
  }
  return out;
}

}  // namespace data
}  // namespace hyperlat
