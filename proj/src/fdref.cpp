#include "qpme/fdref.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "qpme/analytic.hpp"
#include "qpme/errors.hpp"

namespace qpme {

FdGrid FdGrid::make(std::size_t d, double a, double h, const std::function<double(std::span<const double>)>& u0) {
  if (d != 1 && d != 2) throw ContractError("fdref supports d = 1 and d = 2");
  if (!(a > 0.0) || !(h > 0.0)) throw ContractError("fdref needs a > 0 and h > 0");
  const double cells = 2.0 * a / h;
  const auto k = static_cast<std::size_t>(std::llround(cells));
  if (std::fabs(cells - static_cast<double>(k)) > 1e-9 * cells || k % 2 != 0 || k < 2)
    throw ContractError("2a / h must be an even integer, got " + std::to_string(cells));
  FdGrid g;
  g.d = d;
  g.a = a;
  g.h = h;
  g.n = k + 1;
  g.field.assign(d == 1 ? g.n : g.n * g.n, 0.0);
  const std::size_t ny = d == 1 ? 1 : g.n;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < g.n; ++i) {
      const bool edge = i == 0 || i == g.n - 1 || (d == 2 && (j == 0 || j == g.n - 1));
      if (edge) continue;
      const double xy[2] = {g.coord(i), g.coord(j)};
      const double v = u0(std::span<const double>(xy, d));
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("initial data must be finite and nonnegative");
      g.field[j * g.n + i] = v;
    }
  g.dt = stable_dt(g);
  return g;
}

double FdGrid::max() const { return field.empty() ? 0.0 : *std::max_element(field.begin(), field.end()); }

double FdGrid::mass() const {
  double s = 0.0;
  for (double v : field) s += v;
  return s * std::pow(h, static_cast<double>(d));
}

std::vector<double> FdGrid::cross_section() const {
  const std::size_t row = d == 1 ? 0 : center();
  return {field.begin() + static_cast<std::ptrdiff_t>(row * n), field.begin() + static_cast<std::ptrdiff_t>((row + 1) * n)};
}

double stable_dt(const FdGrid& g) {
  return g.h * g.h / (4.0 * static_cast<double>(g.d) * g.max() + kStabilityGuard);
}

namespace {

void check_stability(const FdGrid& g) {
  const double bound = stable_dt(g);
  if (!(g.dt > 0.0) || g.dt > bound)
    throw StabilityError("time step " + std::to_string(g.dt) + " violates the stability bound; use dt <= " +
                             std::to_string(bound),
                         bound);
}

/// New values of row j (x sweep) from the squared field w.
void update_row(const FdGrid& g, const std::vector<double>& w, std::vector<double>& out, std::size_t j) {
  const std::size_t n = g.n;
  const double c = 0.5 * g.dt / (g.h * g.h);
  const bool edge_row = g.d == 2 && (j == 0 || j == n - 1);
  const std::size_t r = j * n;
  out[r] = 0.0;
  out[r + n - 1] = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (edge_row) {
      out[r + i] = 0.0;
      continue;
    }
    double lap = w[r + i - 1] + w[r + i + 1] - 2.0 * w[r + i];
    if (g.d == 2) lap += w[r - n + i] + w[r + n + i] - 2.0 * w[r + i];
    out[r + i] = g.field[r + i] + c * lap;
  }
}

void step_impl(FdGrid& g, bool parallel) {
  check_stability(g);
  std::vector<double> w(g.field.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = g.field[k] * g.field[k];
  std::vector<double> out(g.field.size());
  const std::size_t rows = g.d == 1 ? 1 : g.n;
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(rows); ++j)
      update_row(g, w, out, static_cast<std::size_t>(j));
  } else {
    for (std::size_t j = 0; j < rows; ++j) update_row(g, w, out, j);
  }
  g.field.swap(out);
  g.time += g.dt;
}

}  // namespace

void fd_step(FdGrid& g) { step_impl(g, true); }
void fd_step_serial(FdGrid& g) { step_impl(g, false); }

void advance_to(FdGrid& g, double t_end, bool parallel) {
  const double span = t_end - g.time;
  if (span <= 0.0) return;
  if (!(g.dt > 0.0)) throw StabilityError("time step must be positive", stable_dt(g));
  const auto steps = static_cast<std::size_t>(std::ceil(span / g.dt - 1e-9));
  const double dt_cfg = g.dt;
  g.dt = std::min(span / static_cast<double>(steps), dt_cfg);
  const double t0 = g.time;
  try {
    for (std::size_t k = 0; k < steps; ++k) {
      step_impl(g, parallel);
      g.time = t0 + static_cast<double>(k + 1) * g.dt;
    }
  } catch (...) {
    g.dt = dt_cfg;
    throw;
  }
  g.time = t_end;
  g.dt = dt_cfg;
}

namespace {

/// Index of the outermost node on the +x ray with u > eps, or n when none.
std::size_t outer_support_index(const FdGrid& g, double eps) {
  const std::vector<double> row = g.cross_section();
  for (std::size_t i = g.n - 1; i >= g.center(); --i) {
    if (row[i] > eps) return i;
    if (i == 0) break;
  }
  return g.n;
}

}  // namespace

FreeBoundary free_boundary(const FdGrid& g, double eps) {
  const std::size_t i = outer_support_index(g, eps);
  return {i == g.n ? 0.0 : g.coord(i), eps};
}

DarcyProbe darcy_velocity_probe(const FdGrid& g, double eps) {
  const std::size_t i = outer_support_index(g, eps);
  if (i == g.n) throw DomainError("Darcy probe: no support along the +x ray (u <= eps everywhere)");
  if (i < g.center() + 2) throw DomainError("Darcy probe: support is narrower than three nodes");
  const std::vector<double> row = g.cross_section();
  const double w1 = 0.5 * row[i] * row[i];
  const double w0 = 0.5 * row[i - 1] * row[i - 1];
  // The outermost support node of an evolved solution sits in the one-cell
  // transition the explicit scheme smears the front over; the slope is taken
  // one cell further in.
  return {(w1 - w0) / g.h, -(row[i - 1] - row[i - 2]) / g.h, g.coord(i)};
}

std::vector<double> waiting_snapshot_times() {
  return {0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

WaitingRun waiting_time_experiment(double h, double dt, double eps, std::size_t d) {
  FdGrid g = FdGrid::make(d, 4.0, h, [](std::span<const double> x) { return waiting_ic(x); });
  if (dt > 0.0) g.dt = dt;
  else g.dt = 0.9 * stable_dt(g);
  check_stability(g);

  WaitingRun run;
  run.mass_t0 = g.mass();
  run.probe_t0 = darcy_velocity_probe(g, eps);
  const std::vector<double> snaps = waiting_snapshot_times();
  std::vector<double> xs(g.n);
  for (std::size_t i = 0; i < g.n; ++i) xs[i] = g.coord(i);
  std::size_t next_snap = 0;
  for (int k = 0; k <= 100; ++k) {
    const double t = k / 100.0;
    advance_to(g, t);
    run.radius.push_back({t, free_boundary(g, eps).radius});
    if (next_snap < snaps.size() && std::fabs(snaps[next_snap] - t) < 1e-12) {
      run.snapshots.push_back({t, xs, g.cross_section()});
      ++next_snap;
    }
  }
  run.mass_t1 = g.mass();
  return run;
}

BarenblattFdResult barenblatt_fd_validation(double h, double t_end, double dt) {
  const BarenblattSpec spec = BarenblattSpec::shifted(1);
  const double a = static_cast<double>(domain_halfwidth(1));
  FdGrid g = FdGrid::make(1, a, h, [&](std::span<const double> x) { return barenblatt(spec, 0.0, x); });
  g.dt = dt > 0.0 ? dt : 0.9 * stable_dt(g);
  BarenblattFdResult r{h, 0.0, 0, 0.0, g.mass(), 0.0};
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / g.dt - 1e-9));
  advance_to(g, t_end);
  r.dt = t_end / static_cast<double>(steps);
  r.steps = steps;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    r.max_error = std::max(r.max_error, std::fabs(g.field[i] - barenblatt(spec, t_end, std::span<const double>(&x, 1))));
  }
  r.mass_end = g.mass();
  return r;
}

void write_snapshot_csv(std::ostream& os, const Snapshot& s) {
  os << "x,u\n";
  os.precision(17);
  for (std::size_t i = 0; i < s.x.size(); ++i) os << s.x[i] << ',' << s.u[i] << '\n';
}

}  // namespace qpme
