#pragma once

#include <cmath>

namespace qpme {

// Generic code calls these unqualified so Var/Dual overloads resolve alongside.
using std::abs;
using std::exp;
using std::log;
using std::sqrt;
using std::tanh;

/// log(1 + e^x). The direct form is exact enough below 20 and keeps
/// softplus(ln(e - 1)) == 1; above it the shifted form avoids overflow.
inline double softplus(double x) { return x < 20.0 ? std::log1p(std::exp(x)) : x + std::log1p(std::exp(-x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double value_of(double x) { return x; }
inline double square(double x) { return x * x; }

}  // namespace qpme
