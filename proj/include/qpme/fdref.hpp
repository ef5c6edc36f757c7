#pragma once

// Explicit finite-difference reference for du/dt = 1/2 lap(u^2) on [-a, a]^d,
// d in {1, 2}, with zero Dirichlet data:
//   u^{n+1} = u^n + dt/2 * lap_h (u^n)^2
// using the (2d+1)-point Laplacian on a uniform node grid.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace qpme {

struct FdGrid {
  std::size_t d = 1;
  double a = 4.0;
  double h = 0.04;
  double dt = 0.0;
  double time = 0.0;
  std::size_t n = 0;            // nodes per axis, boundary included
  std::vector<double> field;    // index j * n + i (x_i, y_j)

  /// Nodes -a + i h, i = 0..n-1; 2a / h must be an even integer so that the
  /// origin is a node. Boundary nodes are set to 0.
  static FdGrid make(std::size_t d, double a, double h, const std::function<double(std::span<const double>)>& u0);

  double coord(std::size_t i) const { return -a + static_cast<double>(i) * h; }
  std::size_t center() const { return (n - 1) / 2; }
  double max() const;
  /// sum u h^d
  double mass() const;
  /// Values u(x, 0) along the x axis.
  std::vector<double> cross_section() const;
};

inline constexpr double kStabilityGuard = 1e-12;

/// h^2 / (4 d max u + 1e-12).
double stable_dt(const FdGrid& g);

/// One forward-Euler step with g.dt; rows are updated in parallel. Throws
/// StabilityError (carrying stable_dt) when g.dt exceeds the bound.
void fd_step(FdGrid& g);
/// Same arithmetic on one thread.
void fd_step_serial(FdGrid& g);

/// Steps to exactly `t_end` with equal steps no longer than g.dt.
void advance_to(FdGrid& g, double t_end, bool parallel = true);

inline constexpr double kSupportThreshold = 1e-6;

struct FreeBoundary {
  double radius = 0.0;
  double eps = kSupportThreshold;
};

/// Largest node x >= 0 on the +x ray through the origin with u > eps (0 when
/// no node qualifies).
FreeBoundary free_boundary(const FdGrid& g, double eps = kSupportThreshold);

struct DarcyProbe {
  double flux_gradient;  // backward difference of u^2/2 at the outermost support node
  double front_speed;    // -du/dr over the next pair inwards: the Darcy velocity of the front
  double radius;
};

/// One-sided probes just inside the support along +x. Throws DomainError when
/// no node exceeds eps.
DarcyProbe darcy_velocity_probe(const FdGrid& g, double eps = kSupportThreshold);

struct Snapshot {
  double t;
  std::vector<double> x;
  std::vector<double> u;
};

struct RadiusPoint {
  double t;
  double radius;
};

struct WaitingRun {
  std::vector<RadiusPoint> radius;   // every 0.01 on [0, 1]
  std::vector<Snapshot> snapshots;   // t = 0, 0.02, ..., 0.1, 0.2, ..., 1.0
  DarcyProbe probe_t0;
  double mass_t0;
  double mass_t1;
};

/// Waiting-time data u0 = cos|x| on |x| <= pi/2 over [-4, 4]^2 (or [-4, 4]).
/// dt <= 0 selects 0.9 * stable_dt of the initial data.
WaitingRun waiting_time_experiment(double h, double dt, double eps = kSupportThreshold, std::size_t d = 2);

/// Snapshot times of the waiting experiment.
std::vector<double> waiting_snapshot_times();

struct BarenblattFdResult {
  double h;
  double dt;
  std::size_t steps;
  double max_error;  // max_i |u_h - U(t_end, x_i)|
  double mass_start;
  double mass_end;
};

/// 1D shifted Barenblatt data on [-4, 4] integrated to t_end. dt <= 0 selects
/// 0.9 * stable_dt.
BarenblattFdResult barenblatt_fd_validation(double h, double t_end, double dt = 0.0);

/// CSV x,u.
void write_snapshot_csv(std::ostream& os, const Snapshot& s);

}  // namespace qpme
