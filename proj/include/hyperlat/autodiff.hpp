#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "common.hpp"

// Reverse-mode scalar engine.  A Var is either a constant (no tape) or a node
// on a Tape; arithmetic on Vars records local partials at forward time and
// backward() accumulates adjoints in one reverse sweep.  Reductions over
// vectors (dot, sum, norm) are single fused nodes, which keeps tapes for
// matrix-vector work proportional to the output size.

namespace hyperlat::ad {

class Tape;

struct Var {
  double v = 0.0;
  std::int32_t idx = -1;
  Tape* tape = nullptr;

  Var() = default;
  Var(double value) : v(value) {}  // constant
  double val() const { return v; }
  bool on_tape() const { return idx >= 0; }
};

inline double value_of(const Var& x) { return x.v; }

enum class Op : std::uint8_t {
  kLeaf,
  kNeg,
  kTanh,
  kAtanh,
  kAsinh,
  kAcosh,
  kExp,
  kLog,
  kSqrt,
  kLeakyRelu,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kDot,
  kSum,
  kNorm,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kNeg: return "neg";
    case Op::kTanh: return "tanh";
    case Op::kAtanh: return "atanh";
    case Op::kAsinh: return "asinh";
    case Op::kAcosh: return "acosh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kDot: return "dot";
    case Op::kSum: return "sum";
    case Op::kNorm: return "norm";
  }
  return "?";
}

// Norms below this have no usable direction; their partials are taken as zero.
inline constexpr double kNormFloor = 1e-15;

struct Node {
  std::int32_t a = -1, b = -1;  // parents; for n-ary ops: (args offset, count)
  double pa = 0.0, pb = 0.0;
  Op op = Op::kLeaf;
};

class Tape {
 public:
  Var leaf(double v) {
    Node n;
    n.op = Op::kLeaf;
    return push(v, n);
  }

  void reset() {
    nodes_.clear();
    vals_.clear();
    adj_.clear();
    args_.clear();
    label_events_.clear();
    label_stack_.clear();
  }
  std::size_t size() const { return nodes_.size(); }

  void backward(const Var& root) {
    adj_.assign(nodes_.size(), 0.0);
    if (!root.on_tape()) return;
    adj_[std::size_t(root.idx)] = 1.0;
    for (std::int32_t i = std::int32_t(nodes_.size()) - 1; i >= 0; --i) {
      double g = adj_[std::size_t(i)];
      if (g == 0.0) continue;
      const Node& n = nodes_[std::size_t(i)];
      switch (n.op) {
        case Op::kLeaf:
          break;
        case Op::kDot:
        case Op::kSum:
        case Op::kNorm: {
          const auto* first = args_.data() + n.a;
          for (std::int32_t k = 0; k < n.b; ++k)
            adj_[std::size_t(first[k].first)] += first[k].second * g;
          break;
        }
        default:
          if (n.a >= 0) adj_[std::size_t(n.a)] += n.pa * g;
          if (n.b >= 0) adj_[std::size_t(n.b)] += n.pb * g;
      }
    }
  }

  double adjoint(const Var& x) const { return x.on_tape() ? adj_[std::size_t(x.idx)] : 0.0; }

  // Scoped diagnostic label; the innermost region names non-finite nodes.
  class Region {
   public:
    Region(Tape* t, const char* name) : t_(t) {
      if (t_) t_->enter_label(name);
    }
    ~Region() {
      if (t_) t_->exit_label();
    }
    Region(const Region&) = delete;
    Region& operator=(const Region&) = delete;

   private:
    Tape* t_;
  };

  const char* label_at(std::int32_t idx) const {
    const char* name = nullptr;
    for (const auto& [start, label] : label_events_) {
      if (start > idx) break;
      name = label;
    }
    return name;
  }

  void ensure_finite(const Var& root) const {
    if (std::isfinite(root.val())) return;
    for (std::size_t i = 0; i < vals_.size(); ++i) {
      if (std::isfinite(vals_[i])) continue;
      const char* region = label_at(std::int32_t(i));
      std::string where = op_name(nodes_[i].op);
      if (region) where = std::string(region) + "/" + where;
      throw NumericError("non-finite value produced by " + where);
    }
    throw NumericError("non-finite loss value");
  }

  // --- node emission --------------------------------------------------------

  Var unary(Op op, double val, const Var& x, double px) {
    Node n;
    n.op = op;
    n.a = x.idx;
    n.pa = px;
    return push(val, n);
  }

  Var binary(Op op, double val, const Var& x, double px, const Var& y, double py) {
    Node n;
    n.op = op;
    n.a = x.idx;
    n.pa = px;
    n.b = y.idx;
    n.pb = py;
    return push(val, n);
  }

  std::size_t args_begin() const { return args_.size(); }
  void arg(const Var& x, double partial) {
    if (x.on_tape()) args_.emplace_back(x.idx, partial);
  }
  Var nary(Op op, double val, std::size_t args_start) {
    Node n;
    n.op = op;
    n.a = std::int32_t(args_start);
    n.b = std::int32_t(args_.size() - args_start);
    return push(val, n);
  }

 private:
  Var push(double v, Node n) {
    Var out;
    out.v = v;
    out.idx = std::int32_t(nodes_.size());
    out.tape = this;
    nodes_.push_back(n);
    vals_.push_back(v);
    return out;
  }

  void enter_label(const char* name) {
    label_stack_.push_back(name);
    label_events_.emplace_back(std::int32_t(nodes_.size()), name);
  }
  void exit_label() {
    label_stack_.pop_back();
    label_events_.emplace_back(std::int32_t(nodes_.size()),
                               label_stack_.empty() ? nullptr : label_stack_.back());
  }

  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> adj_;
  std::vector<std::pair<std::int32_t, double>> args_;
  std::vector<std::pair<std::int32_t, const char*>> label_events_;
  std::vector<const char*> label_stack_;
};

inline Tape* tape_of(const Var& a) { return a.tape; }
inline Tape* tape_of(const Var& a, const Var& b) { return a.tape ? a.tape : b.tape; }

// --- arithmetic -------------------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
  double v = a.v + b.v;
  Tape* t = tape_of(a, b);
  return t ? t->binary(Op::kAdd, v, a, 1.0, b, 1.0) : Var(v);
}

inline Var operator-(const Var& a, const Var& b) {
  double v = a.v - b.v;
  Tape* t = tape_of(a, b);
  return t ? t->binary(Op::kSub, v, a, 1.0, b, -1.0) : Var(v);
}

inline Var operator*(const Var& a, const Var& b) {
  double v = a.v * b.v;
  Tape* t = tape_of(a, b);
  return t ? t->binary(Op::kMul, v, a, b.v, b, a.v) : Var(v);
}

inline Var operator/(const Var& a, const Var& b) {
  double v = a.v / b.v;
  Tape* t = tape_of(a, b);
  return t ? t->binary(Op::kDiv, v, a, 1.0 / b.v, b, -v / b.v) : Var(v);
}

inline Var operator-(const Var& a) {
  return a.tape ? a.tape->unary(Op::kNeg, -a.v, a, -1.0) : Var(-a.v);
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

// --- elementary functions ---------------------------------------------------

inline Var tanh(const Var& x) {
  double y = std::tanh(x.v);
  return x.tape ? x.tape->unary(Op::kTanh, y, x, 1.0 - y * y) : Var(y);
}

inline Var atanh(const Var& x) {
  double y = std::atanh(x.v);
  return x.tape ? x.tape->unary(Op::kAtanh, y, x, 1.0 / (1.0 - x.v * x.v)) : Var(y);
}

inline Var asinh(const Var& x) {
  double y = std::asinh(x.v);
  return x.tape ? x.tape->unary(Op::kAsinh, y, x, 1.0 / std::sqrt(1.0 + x.v * x.v)) : Var(y);
}

// acosh with the argument clamped to [1, inf); at the clamp the subgradient 0
// is used, mirroring the zero-direction convention for norms.
inline Var acosh_c(const Var& x) {
  if (x.v <= 1.0) return Var(0.0);
  double y = std::acosh(x.v);
  return x.tape ? x.tape->unary(Op::kAcosh, y, x, 1.0 / std::sqrt(x.v * x.v - 1.0)) : Var(y);
}

inline Var exp(const Var& x) {
  double y = std::exp(x.v);
  return x.tape ? x.tape->unary(Op::kExp, y, x, y) : Var(y);
}

inline Var log(const Var& x) {
  double y = std::log(x.v);
  return x.tape ? x.tape->unary(Op::kLog, y, x, 1.0 / x.v) : Var(y);
}

inline Var sqrt(const Var& x) {
  double y = std::sqrt(x.v);
  double p = y > 0.0 ? 0.5 / y : 0.0;
  return x.tape ? x.tape->unary(Op::kSqrt, y, x, p) : Var(y);
}

inline Var leaky_relu(const Var& x, double slope) {
  double p = x.v >= 0.0 ? 1.0 : slope;
  double y = p * x.v;
  return x.tape ? x.tape->unary(Op::kLeakyRelu, y, x, p) : Var(y);
}

// --- fused reductions -------------------------------------------------------

namespace detail {
inline Tape* tape_in(const Var* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (a[i].tape) return a[i].tape;
  return nullptr;
}
}  // namespace detail

inline Var vdot_n(const Var* a, const Var* b, std::size_t n) {
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) v += a[i].v * b[i].v;
  Tape* t = detail::tape_in(a, n);
  if (!t) t = detail::tape_in(b, n);
  if (!t) return Var(v);
  std::size_t start = t->args_begin();
  for (std::size_t i = 0; i < n; ++i) {
    t->arg(a[i], b[i].v);
    t->arg(b[i], a[i].v);
  }
  return t->nary(Op::kDot, v, start);
}

inline Var vdot_n(const Var* a, const double* b, std::size_t n) {
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) v += a[i].v * b[i];
  Tape* t = detail::tape_in(a, n);
  if (!t) return Var(v);
  std::size_t start = t->args_begin();
  for (std::size_t i = 0; i < n; ++i) t->arg(a[i], b[i]);
  return t->nary(Op::kDot, v, start);
}

inline Var vdot_n(const double* a, const Var* b, std::size_t n) { return vdot_n(b, a, n); }

inline Var vdot(const Vec<Var>& a, const Vec<Var>& b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  return vdot_n(a.data(), b.data(), a.size());
}
inline Var vdot(const Vec<Var>& a, const Vec<double>& b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  return vdot_n(a.data(), b.data(), a.size());
}
inline Var vdot(const Vec<double>& a, const Vec<Var>& b) { return vdot(b, a); }

inline Var vsum(const Vec<Var>& a) {
  double v = 0.0;
  for (const Var& x : a) v += x.v;
  Tape* t = detail::tape_in(a.data(), a.size());
  if (!t) return Var(v);
  std::size_t start = t->args_begin();
  for (const Var& x : a) t->arg(x, 1.0);
  return t->nary(Op::kSum, v, start);
}

inline Var vnorm(const Vec<Var>& a) {
  double s = 0.0;
  for (const Var& x : a) s += x.v * x.v;
  double v = std::sqrt(s);
  Tape* t = detail::tape_in(a.data(), a.size());
  if (!t || v < kNormFloor) return Var(v);
  std::size_t start = t->args_begin();
  for (const Var& x : a) t->arg(x, x.v / v);
  return t->nary(Op::kNorm, v, start);
}

inline Vec<Var> mat_apply(const Matrix<Var>& M, const Vec<Var>& x) {
  if (M.cols != x.size()) throw DimensionError("mat_apply: size mismatch");
  Vec<Var> out(M.rows);
  for (std::size_t i = 0; i < M.rows; ++i) out[i] = vdot_n(M.row(i), x.data(), M.cols);
  return out;
}

inline Vec<Var> mat_apply(const Matrix<double>& M, const Vec<Var>& x) {
  if (M.cols != x.size()) throw DimensionError("mat_apply: size mismatch");
  Vec<Var> out(M.rows);
  for (std::size_t i = 0; i < M.rows; ++i) out[i] = vdot_n(x.data(), M.row(i), M.cols);
  return out;
}

}  // namespace hyperlat::ad
