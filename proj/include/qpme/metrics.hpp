#pragma once

// Error metrics on a two-dimensional solution slice u(t, x, y, c, ..., c) and
// post-training constraint audits.
//
// The slice grid is cell-centred: node i sits at -a + (i + 1/2) h with
// h = 2a / n, so the discrete sums are midpoint rules with cell weight h^2.
// For d = 1 the slice is the line u(t, x) with weight h.

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "qpme/analytic.hpp"
#include "qpme/formulations.hpp"

namespace qpme {

struct SlicePoint {
  double u = 0.0;
  double gx = 0.0;
  double gy = 0.0;  // 0 when d = 1
};

/// Values and slice-plane gradients at a block of points (columns (t, x)).
using SliceEvaluator = std::function<std::vector<SlicePoint>(const Eigen::MatrixXd&)>;

/// Adapts a pointwise evaluator.
SliceEvaluator pointwise(std::function<SlicePoint(double, std::span<const double>)> f);

struct SliceGrid {
  double t = 0.5;
  double c = 1.0;
  double a = 1.0;
  std::size_t n = 100;
  std::size_t d = 2;
  std::vector<double> values;                // ny x n, row j holds y_j, column i holds x_i
  std::vector<std::array<double, 2>> grad;   // same layout

  std::size_t ny() const { return d == 1 ? 1 : n; }
  double coordinate(std::size_t i) const { return -a + (static_cast<double>(i) + 0.5) * (2.0 * a / static_cast<double>(n)); }
  double cell_weight() const;
  double value(std::size_t i, std::size_t j = 0) const { return values[j * n + i]; }
};

/// Nodes are evaluated in fixed chunks (OpenMP) and assembled in node order.
SliceGrid eval_slice(const SliceEvaluator& f, const DomainSpec& domain, double t, double c, std::size_t n);

struct SliceNorms {
  double l1;
  double l2;
  double h1;
};
SliceNorms slice_norms(const SliceGrid& g);

struct RelativeErrors {
  double l1;
  double l2;
  double h1;
};
/// ||pred - exact|| / ||exact|| in the three discrete norms.
RelativeErrors relative_errors(const SliceGrid& pred, const SliceGrid& exact);

SliceEvaluator exact_slice_evaluator(const BarenblattSpec& exact);
/// Recovered u for any trained model (u, u_phi or q / sigma) with AD gradients.
SliceEvaluator model_slice_evaluator(const Model& model, const ParamVector& params);

struct ConstraintReport {
  std::size_t samples = 0;
  double denominator_violation = 0.0;  // fraction with 1 - lap(phi) < (t/T)^(d/(d+2))
  double negative_u = 0.0;             // fraction with recovered u < 0
  double sigma_violation = 0.0;        // fraction with sigma < (t/T)^(d/(d+2))
  double min_denominator = 0.0;
};

ConstraintReport constraint_audit(const PhiEvaluator& phi, const PointBatch& points, double T);
ConstraintReport constraint_audit(const QSigmaEvaluator& qs, const PointBatch& points, double T);

/// CSV x,y,value,gx,gy (y and gy are 0 for d = 1).
void write_slice_csv(std::ostream& os, const SliceGrid& g);

}  // namespace qpme
