#pragma once

// Truncated Taylor arithmetic.
//
// Jet2<S> carries (f, f', f'') along one input direction, where S is the
// underlying scalar (double, Var for taped reverse mode, Dual for one extra
// forward derivative). Products and compositions keep only terms through
// second order, so a chain of jet operations yields exact directional
// derivatives of the composed function.

#include <cmath>

#include "qpme/scalar_math.hpp"

namespace qpme {

/// First-order forward-mode number: value plus one directional derivative.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  Dual(double value, double deriv) : v(value), d(deriv) {}
};

inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(const Dual& a, const Dual& b) {
  const double q = a.v / b.v;
  return {q, (a.d - q * b.d) / b.v};
}
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator+(const Dual& a, double b) { return {a.v + b, a.d}; }
inline Dual operator+(double a, const Dual& b) { return {a + b.v, b.d}; }
inline Dual operator-(const Dual& a, double b) { return {a.v - b, a.d}; }
inline Dual operator-(double a, const Dual& b) { return {a - b.v, -b.d}; }
inline Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
inline Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.d}; }
inline Dual operator/(const Dual& a, double b) { return {a.v / b, a.d / b}; }
inline Dual& operator+=(Dual& a, const Dual& b) { return a = a + b; }
inline Dual& operator-=(Dual& a, const Dual& b) { return a = a - b; }
inline Dual& operator*=(Dual& a, const Dual& b) { return a = a * b; }

inline double value_of(const Dual& x) { return x.v; }
inline Dual square(const Dual& x) { return {x.v * x.v, 2.0 * x.v * x.d}; }
inline Dual abs(const Dual& x) { return x.v < 0.0 ? -x : x; }
inline Dual softplus(const Dual& x) { return {softplus(x.v), sigmoid(x.v) * x.d}; }
inline Dual sigmoid(const Dual& x) {
  const double s = sigmoid(x.v);
  return {s, s * (1.0 - s) * x.d};
}
inline Dual tanh(const Dual& x) {
  const double th = std::tanh(x.v);
  return {th, (1.0 - th * th) * x.d};
}
inline Dual exp(const Dual& x) {
  const double e = std::exp(x.v);
  return {e, e * x.d};
}
inline Dual log(const Dual& x) { return {std::log(x.v), x.d / x.v}; }
inline Dual sqrt(const Dual& x) {
  const double r = std::sqrt(x.v);
  return {r, 0.5 * x.d / r};
}

template <class S>
struct Jet2 {
  S v{};
  S d1{};
  S d2{};

  Jet2() = default;
  Jet2(S value) : v(value), d1(0.0), d2(0.0) {}  // NOLINT(google-explicit-constructor)
  Jet2(S value, S first, S second) : v(value), d1(first), d2(second) {}

  /// Independent variable along the jet direction.
  static Jet2 variable(S x) { return Jet2(x, S(1.0), S(0.0)); }
};

template <class S>
Jet2<S> operator+(const Jet2<S>& a, const Jet2<S>& b) {
  return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}
template <class S>
Jet2<S> operator-(const Jet2<S>& a, const Jet2<S>& b) {
  return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
}
template <class S>
Jet2<S> operator-(const Jet2<S>& a) {
  return {-a.v, -a.d1, -a.d2};
}
template <class S>
Jet2<S> operator*(const Jet2<S>& a, const Jet2<S>& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * (a.d1 * b.d1) + a.v * b.d2};
}
template <class S>
Jet2<S> operator/(const Jet2<S>& a, const Jet2<S>& b) {
  const S q = a.v / b.v;
  const S q1 = (a.d1 - q * b.d1) / b.v;
  const S q2 = (a.d2 - 2.0 * (q1 * b.d1) - q * b.d2) / b.v;
  return {q, q1, q2};
}
template <class S>
Jet2<S> operator*(const Jet2<S>& a, const S& s) {
  return {a.v * s, a.d1 * s, a.d2 * s};
}
template <class S>
Jet2<S> operator*(const S& s, const Jet2<S>& a) {
  return a * s;
}
template <class S>
Jet2<S> operator+(const Jet2<S>& a, const S& s) {
  return {a.v + s, a.d1, a.d2};
}
template <class S>
Jet2<S>& operator+=(Jet2<S>& a, const Jet2<S>& b) {
  return a = a + b;
}

/// Composition f(a) given f, f', f'' evaluated at a.v.
template <class S>
Jet2<S> compose(const Jet2<S>& a, const S& f0, const S& f1, const S& f2) {
  return {f0, f1 * a.d1, f2 * square(a.d1) + f1 * a.d2};
}

template <class S>
Jet2<S> softplus(const Jet2<S>& a) {
  const S s = sigmoid(a.v);
  return compose(a, softplus(a.v), s, s * (1.0 - s));
}

template <class S>
Jet2<S> tanh(const Jet2<S>& a) {
  const S th = tanh(a.v);
  const S g1 = 1.0 - square(th);
  return compose(a, th, g1, -2.0 * (th * g1));
}

}  // namespace qpme
