#include "qpme/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "qpme/errors.hpp"

namespace qpme {

namespace {

double norm_sq(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

// beta (m - 1) / 2; for m = 2 written as 1 / (2 (d + 2)) so the shifted
// solution at t = 0 reproduces the initial condition bit for bit.
double profile_coefficient(const BarenblattSpec& spec) {
  if (spec.m == 2.0) return 1.0 / (2.0 * (static_cast<double>(spec.d) + 2.0));
  return spec.beta() * (spec.m - 1.0) / 2.0;
}

double time_arg(const BarenblattSpec& spec, double t) {
  const double s = t + spec.time_shift;
  if (!(s > 0.0))
    throw DomainError("Barenblatt solution needs t + shift > 0, got " + std::to_string(s));
  return s;
}

void check_dim(const BarenblattSpec& spec, std::span<const double> x) {
  if (x.size() != spec.d)
    throw ContractError("point has dimension " + std::to_string(x.size()) + ", solution has d = " +
                        std::to_string(spec.d));
}

double ic_coefficient(std::size_t d) { return 1.0 / (2.0 * (static_cast<double>(d) + 2.0)); }

}  // namespace

void DomainSpec::validate() const {
  if (d == 0) throw ContractError("DomainSpec: d must be >= 1");
  if (half_widths.size() != d) throw ContractError("DomainSpec: need one half width per axis");
  for (double a : half_widths)
    if (!(a > 0.0)) throw ContractError("DomainSpec: half widths must be positive");
  if (!(T > 0.0)) throw ContractError("DomainSpec: T must be positive");
}

DomainSpec DomainSpec::cube(std::size_t d, double a, double T) { return DomainSpec{d, std::vector<double>(d, a), T}; }

double DomainSpec::log_volume() const {
  double s = 0.0;
  for (double a : half_widths) s += std::log(2.0 * a);
  return s;
}

bool DomainSpec::contains(std::span<const double> x) const {
  if (x.size() != d) return false;
  for (std::size_t i = 0; i < d; ++i)
    if (std::fabs(x[i]) > half_widths[i]) return false;
  return true;
}

void BarenblattSpec::validate() const {
  if (!(C > 0.0)) throw ContractError("BarenblattSpec: C must be positive");
  if (d == 0) throw ContractError("BarenblattSpec: d must be >= 1");
  if (!(m > 1.0)) throw ContractError("BarenblattSpec: m must exceed 1");
}

double barenblatt(const BarenblattSpec& spec, double t, std::span<const double> x) {
  check_dim(spec, x);
  const double s = time_arg(spec, t);
  const double alpha = spec.m == 2.0 ? static_cast<double>(spec.d) / (static_cast<double>(spec.d) + 2.0) : spec.alpha();
  const double beta = spec.m == 2.0 ? 1.0 / (static_cast<double>(spec.d) + 2.0) : spec.beta();
  const double inner = spec.C - profile_coefficient(spec) * norm_sq(x) * std::pow(s, -2.0 * beta);
  if (inner <= 0.0) return 0.0;
  const double shape = spec.m == 2.0 ? inner : std::pow(inner, 1.0 / (spec.m - 1.0));
  return std::pow(s, -alpha) * shape;
}

SpaceTimeDerivsT<double> barenblatt_derivs(const BarenblattSpec& spec, double t, std::span<const double> x) {
  check_dim(spec, x);
  if (spec.m != 2.0) throw ContractError("barenblatt_derivs: closed-form derivatives are implemented for m = 2");
  const double s = time_arg(spec, t);
  const double dd = static_cast<double>(spec.d);
  const double alpha = dd / (dd + 2.0);
  const double beta = 1.0 / (dd + 2.0);
  const double k = profile_coefficient(spec);
  const double r2 = norm_sq(x);
  const double s_a = std::pow(s, -alpha);
  const double s_2b = std::pow(s, -2.0 * beta);
  const double inner = spec.C - k * r2 * s_2b;

  SpaceTimeDerivsT<double> out;
  out.grad.assign(spec.d, 0.0);
  const double r = std::sqrt(r2);
  if (r > free_boundary_radius(spec, t)) return out;
  out.u = std::max(inner, 0.0) * s_a;
  out.ut = -alpha * s_a / s * inner + s_a * (2.0 * beta * k * r2 * s_2b / s);
  const double g = -2.0 * k * s_a * s_2b;
  for (std::size_t i = 0; i < spec.d; ++i) out.grad[i] = g * x[i];
  out.lap = g * dd;
  return out;
}

double free_boundary_radius(const BarenblattSpec& spec, double t) {
  const double s = time_arg(spec, t);
  const double beta = spec.m == 2.0 ? 1.0 / (static_cast<double>(spec.d) + 2.0) : spec.beta();
  return std::sqrt(spec.C / profile_coefficient(spec)) * std::pow(s, beta);
}

int domain_halfwidth(std::size_t d) {
  if (d == 0) throw ContractError("domain_halfwidth: d must be >= 1");
  return static_cast<int>(std::ceil(free_boundary_radius(BarenblattSpec::shifted(d), 1.0)));
}

double barenblatt_residual(const BarenblattSpec& spec, double t, std::span<const double> x) {
  const double r = std::sqrt(norm_sq(x));
  const double rt = free_boundary_radius(spec, t);
  if (r > rt) return 0.0;
  if (r >= 0.95 * rt)
    throw DomainError("barenblatt_residual: |x| = " + std::to_string(r) + " lies in the free-boundary collar [0.95 r_t, r_t]");
  return qpme_residual(barenblatt_derivs(spec, t, x));
}

ScaleInvariancePair scale_invariance_check(const BarenblattSpec& spec, double lambda, double t,
                                           std::span<const double> x) {
  if (!(lambda > 0.0)) throw DomainError("scale_invariance_check: lambda must be positive");
  BarenblattSpec plain = spec;
  plain.time_shift = 0.0;
  std::vector<double> xs(x.begin(), x.end());
  const double lb = std::pow(lambda, plain.beta());
  for (double& v : xs) v *= lb;
  return {std::pow(lambda, plain.alpha()) * barenblatt(plain, lambda * t, xs), barenblatt(plain, t, x)};
}

double waiting_ic(std::span<const double> x) {
  const double r = std::sqrt(norm_sq(x));
  return r <= std::numbers::pi / 2.0 ? std::cos(r) : 0.0;
}

InitialCondition InitialCondition::barenblatt(std::size_t d) {
  if (d == 0) throw ContractError("InitialCondition: d must be >= 1");
  return {Kind::Barenblatt, d};
}

InitialCondition InitialCondition::waiting(std::size_t d) {
  if (d == 0) throw ContractError("InitialCondition: d must be >= 1");
  return {Kind::Waiting, d};
}

double InitialCondition::value(std::span<const double> x) const {
  if (x.size() != d_) throw ContractError("InitialCondition: dimension mismatch");
  if (kind_ == Kind::Waiting) return waiting_ic(x);
  return std::max(1.0 - norm_sq(x) * ic_coefficient(d_), 0.0);
}

Jet2<double> InitialCondition::axis_jet(std::span<const double> x, std::size_t k) const {
  if (k >= d_) throw ContractError("InitialCondition::axis_jet: axis out of range");
  const double v = value(x);
  const double r2 = norm_sq(x);
  const double r = std::sqrt(r2);
  if (r > kink_radius()) return {0.0, 0.0, 0.0};
  if (kind_ == Kind::Barenblatt) {
    const double c = 2.0 * ic_coefficient(d_);  // 1 / (d + 2)
    return {v, -c * x[k], -c};
  }
  if (r < 1e-8) return {v, -x[k], -1.0};
  const double s = std::sin(r);
  const double c = std::cos(r);
  const double xk2 = x[k] * x[k];
  return {v, -s * x[k] / r, -c * xk2 / r2 - s * (r2 - xk2) / (r2 * r)};
}

double InitialCondition::laplacian(std::span<const double> x) const {
  double lap = 0.0;
  for (std::size_t k = 0; k < d_; ++k) lap += axis_jet(x, k).d2;
  return lap;
}

double InitialCondition::kink_radius() const {
  if (kind_ == Kind::Waiting) return std::numbers::pi / 2.0;
  return std::sqrt(2.0 * (static_cast<double>(d_) + 2.0));
}

bool InitialCondition::near_kink(std::span<const double> x, double tol) const {
  return std::fabs(std::sqrt(norm_sq(x)) - kink_radius()) < tol;
}

}  // namespace qpme
