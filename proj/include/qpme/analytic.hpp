#pragma once

// Closed-form problem data for the quadratic porous medium equation
//   du/dt = 1/2 lap(u^2) = |grad u|^2 + u lap(u)
// on Q = [0, T] x prod_i [-a_i, a_i] with homogeneous Dirichlet data.

#include <cstddef>
#include <span>
#include <vector>

#include "qpme/errors.hpp"
#include "qpme/jet.hpp"
#include "qpme/spacetime.hpp"

namespace qpme {

struct DomainSpec {
  std::size_t d = 1;
  std::vector<double> half_widths{1.0};
  double T = 1.0;

  void validate() const;
  /// Cube [-a, a]^d.
  static DomainSpec cube(std::size_t d, double a, double T = 1.0);
  double log_volume() const;
  bool contains(std::span<const double> x) const;
};

/// U_m(t, x; C) = s^-alpha ((C - beta (m-1)/2 |x|^2 / s^(2 beta))^+)^(1/(m-1)), s = t + time_shift.
struct BarenblattSpec {
  double C = 1.0;
  std::size_t d = 1;
  double m = 2.0;
  double time_shift = 0.0;

  void validate() const;
  double alpha() const { return static_cast<double>(d) / (static_cast<double>(d) * (m - 1.0) + 2.0); }
  double beta() const { return alpha() / static_cast<double>(d); }

  /// The shifted solution (C = 1, shift 1) used as the exact IBVP reference.
  static BarenblattSpec shifted(std::size_t d) { return {1.0, d, 2.0, 1.0}; }
};

double barenblatt(const BarenblattSpec& spec, double t, std::span<const double> x);

/// Closed-form partial derivatives (zero outside the support; interior-side
/// values are returned exactly on the free boundary).
SpaceTimeDerivsT<double> barenblatt_derivs(const BarenblattSpec& spec, double t, std::span<const double> x);

double free_boundary_radius(const BarenblattSpec& spec, double t);

/// ceil(r_T) for the shifted solution at T = 1, r_T = (2+d)^(1/2) 2^((4+d)/(2d+4)).
int domain_halfwidth(std::size_t d);

/// du/dt - |grad u|^2 - u lap(u) from the closed-form derivatives. Points with
/// |x| > r_t return 0; points inside the 0.95 r_t .. r_t collar are rejected.
double barenblatt_residual(const BarenblattSpec& spec, double t, std::span<const double> x);

struct ScaleInvariancePair {
  double scaled;  // lambda^alpha U(lambda t, lambda^beta x)
  double plain;   // U(t, x)
};
ScaleInvariancePair scale_invariance_check(const BarenblattSpec& spec, double lambda, double t,
                                           std::span<const double> x);

/// cos(|x|) on |x| <= pi/2, zero elsewhere.
double waiting_ic(std::span<const double> x);

/// Initial data u0 with per-axis second-order jets (needed by the hard-IC ansatz).
class InitialCondition {
 public:
  enum class Kind { Barenblatt, Waiting };

  static InitialCondition barenblatt(std::size_t d);
  static InitialCondition waiting(std::size_t d);

  Kind kind() const { return kind_; }
  std::size_t dim() const { return d_; }
  double value(std::span<const double> x) const;
  /// (u0, du0/dx_k, d2u0/dx_k^2) with k a spatial index in [0, d).
  Jet2<double> axis_jet(std::span<const double> x, std::size_t k) const;
  double laplacian(std::span<const double> x) const;
  /// Support radius of u0 (u0 is only Lipschitz there).
  double kink_radius() const;
  /// True when | |x| - kink_radius | < tol.
  bool near_kink(std::span<const double> x, double tol = 1e-9) const;

 private:
  InitialCondition(Kind kind, std::size_t d) : kind_(kind), d_(d) {}
  Kind kind_;
  std::size_t d_;
};

}  // namespace qpme
