#pragma once

// Reverse-mode accumulation over a flat tape of scalar operations. Each node
// keeps at most two parents and the local partials; a backward sweep from an
// output node yields adjoints for every recorded node.

#include <cmath>
#include <cstdint>
#include <vector>

#include "qpme/scalar_math.hpp"

namespace qpme {

class Tape {
 public:
  struct Node {
    std::int32_t a;
    std::int32_t b;
    double da;
    double db;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::int32_t new_leaf() { return push(-1, 0.0, -1, 0.0); }

  std::int32_t push(std::int32_t a, double da, std::int32_t b, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  void clear() {
    nodes_.clear();
    adj_.clear();
  }
  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(out)/d(out) = seed and sweeps back to node 0.
  void backward(std::int32_t out, double seed = 1.0) {
    adj_.assign(nodes_.size(), 0.0);
    if (out < 0) return;
    adj_[static_cast<std::size_t>(out)] = seed;
    for (std::int32_t i = out; i >= 0; --i) {
      const double g = adj_[static_cast<std::size_t>(i)];
      if (g == 0.0) continue;  // also keeps NaN partials of dead branches out
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.a >= 0) adj_[static_cast<std::size_t>(n.a)] += n.da * g;
      if (n.b >= 0) adj_[static_cast<std::size_t>(n.b)] += n.db * g;
    }
  }

  double adjoint(std::int32_t idx) const {
    return idx >= 0 && static_cast<std::size_t>(idx) < adj_.size() ? adj_[static_cast<std::size_t>(idx)] : 0.0;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<double> adj_;
};

/// Scalar recorded on a Tape. A Var without a tape is a constant.
struct Var {
  double val = 0.0;
  std::int32_t idx = -1;
  Tape* tape = nullptr;

  Var() = default;
  Var(double v) : val(v) {}  // NOLINT(google-explicit-constructor): constants mix freely
  Var(double v, std::int32_t i, Tape* t) : val(v), idx(i), tape(t) {}

  static Var leaf(Tape& t, double v) { return Var(v, t.new_leaf(), &t); }
  bool is_constant() const { return tape == nullptr; }
};

namespace detail {
inline Var unary(const Var& a, double v, double da) {
  if (a.tape == nullptr) return Var(v);
  return Var(v, a.tape->push(a.idx, da, -1, 0.0), a.tape);
}
inline Var binary(const Var& a, const Var& b, double v, double da, double db) {
  Tape* t = a.tape != nullptr ? a.tape : b.tape;
  if (t == nullptr) return Var(v);
  return Var(v, t->push(a.idx, da, b.idx, db), t);
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) { return detail::binary(a, b, a.val + b.val, 1.0, 1.0); }
inline Var operator-(const Var& a, const Var& b) { return detail::binary(a, b, a.val - b.val, 1.0, -1.0); }
inline Var operator*(const Var& a, const Var& b) { return detail::binary(a, b, a.val * b.val, b.val, a.val); }
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.val / b.val;
  return detail::binary(a, b, q, 1.0 / b.val, -q / b.val);
}
inline Var operator-(const Var& a) { return detail::unary(a, -a.val, -1.0); }
inline Var operator+(const Var& a, double b) { return detail::unary(a, a.val + b, 1.0); }
inline Var operator+(double a, const Var& b) { return detail::unary(b, a + b.val, 1.0); }
inline Var operator-(const Var& a, double b) { return detail::unary(a, a.val - b, 1.0); }
inline Var operator-(double a, const Var& b) { return detail::unary(b, a - b.val, -1.0); }
inline Var operator*(const Var& a, double b) { return detail::unary(a, a.val * b, b); }
inline Var operator*(double a, const Var& b) { return detail::unary(b, a * b.val, a); }
inline Var operator/(const Var& a, double b) { return detail::unary(a, a.val / b, 1.0 / b); }
inline Var operator/(double a, const Var& b) {
  const double q = a / b.val;
  return detail::unary(b, q, -q / b.val);
}
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline double value_of(const Var& x) { return x.val; }
inline Var square(const Var& x) { return detail::unary(x, x.val * x.val, 2.0 * x.val); }
inline Var abs(const Var& x) {
  const double s = x.val > 0.0 ? 1.0 : (x.val < 0.0 ? -1.0 : 0.0);
  return detail::unary(x, std::fabs(x.val), s);
}
inline Var softplus(const Var& x) { return detail::unary(x, softplus(x.val), sigmoid(x.val)); }
inline Var sigmoid(const Var& x) {
  const double s = sigmoid(x.val);
  return detail::unary(x, s, s * (1.0 - s));
}
inline Var tanh(const Var& x) {
  const double th = std::tanh(x.val);
  return detail::unary(x, th, 1.0 - th * th);
}
inline Var exp(const Var& x) {
  const double e = std::exp(x.val);
  return detail::unary(x, e, e);
}
inline Var log(const Var& x) { return detail::unary(x, std::log(x.val), 1.0 / x.val); }
inline Var sqrt(const Var& x) {
  const double r = std::sqrt(x.val);
  return detail::unary(x, r, 0.5 / r);
}

}  // namespace qpme
