#pragma once

// Named parameter tensors. Map ordering is lexicographic, which fixes the
// canonical parameter order used by the optimizer and the checkpoint format.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "hyperlat/autodiff.hpp"
#include "hyperlat/common.hpp"

namespace hyperlat {

template <class S>
struct TensorT {
  std::vector<std::size_t> shape;
  Vec<S> v;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
};

using Tensor = TensorT<double>;

inline Tensor tensor_from(const Matrix<double>& m) {
  return Tensor{{m.rows, m.cols}, m.a};
}

inline Tensor tensor_from(const Vec<double>& v) { return Tensor{{v.size()}, v}; }

template <class S>
Matrix<S> as_matrix(const TensorT<S>& t) {
  if (t.shape.size() != 2) throw DimensionError("as_matrix: tensor is not rank 2");
  Matrix<S> m(t.shape[0], t.shape[1]);
  m.a = t.v;
  return m;
}

template <class S>
const Vec<S>& as_vec(const TensorT<S>& t) {
  if (t.shape.size() != 1) throw DimensionError("as_vec: tensor is not rank 1");
  return t.v;
}

template <class S>
struct ParamsT {
  std::map<std::string, TensorT<S>> t;

  void add(const std::string& name, TensorT<S> tensor) {
    if (tensor.numel() != tensor.v.size()) {
      throw DimensionError("ParamsT::add: shape does not match data for '" + name + "'");
    }
    if (!t.emplace(name, std::move(tensor)).second) {
      throw DomainError("ParamsT::add: duplicate tensor name '" + name + "'");
    }
  }

  TensorT<S>& at(const std::string& name) {
    auto it = t.find(name);
    if (it == t.end()) throw DomainError("ParamsT: no tensor named '" + name + "'");
    return it->second;
  }
  const TensorT<S>& at(const std::string& name) const {
    auto it = t.find(name);
    if (it == t.end()) throw DomainError("ParamsT: no tensor named '" + name + "'");
    return it->second;
  }

  bool has(const std::string& name) const { return t.count(name) != 0; }

  std::size_t total_numel() const {
    std::size_t n = 0;
    for (auto& [k, tt] : t) n += tt.numel();
    return n;
  }
};

using ParamSet = ParamsT<double>;
using VarParams = ParamsT<ad::Var>;

inline ParamSet zeros_like(const ParamSet& p) {
  ParamSet out;
  for (auto& [name, t] : p.t) out.t.emplace(name, Tensor{t.shape, Vec<double>(t.v.size(), 0.0)});
  return out;
}

// Mirror a ParamSet as tape leaves; gradient flows back to every coordinate.
inline VarParams lift(ad::Tape& tape, const ParamSet& p) {
  VarParams out;
  for (auto& [name, t] : p.t) {
    TensorT<ad::Var> vt;
    vt.shape = t.shape;
    vt.v.reserve(t.v.size());
    for (double x : t.v) vt.v.push_back(tape.leaf(x));
    out.t.emplace(name, std::move(vt));
  }
  return out;
}

}  // namespace hyperlat
