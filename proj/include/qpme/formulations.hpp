#pragma once

// Loss functionals as batch evaluators. Every term is a plain mean over its
// batch; per-sample term functions below are templates shared by the
// double-valued evaluator API, the chunked fast path and the taped reference.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpme/analytic.hpp"
#include "qpme/ansatz.hpp"
#include "qpme/mlp.hpp"
#include "qpme/rng.hpp"
#include "qpme/sampling.hpp"

namespace qpme {

enum class FormulationKind { PinnL2, PinnL1, Phi, QSigma };
enum class Norm { L1, L2 };

std::string to_string(FormulationKind k);
FormulationKind formulation_from_string(const std::string& name);
std::string to_string(Norm n);
Norm norm_from_string(const std::string& name);

/// Which terms multiply each sample by its correction weight c(x). The
/// objective of the phi and q-sigma losses always does.
struct CorrectionFlags {
  bool pde = false;
  bool initial = false;
  bool consistency = false;
};

inline constexpr double kSoftGuardFloor = 1e-6;

struct FormulationConfig {
  FormulationKind kind = FormulationKind::PinnL2;
  double kappa = 1.0;
  double mu = 1.0;
  double nu = 1.0;
  double gamma = 1.0;
  CorrectionFlags correction;
  Norm consistency_norm = Norm::L2;
  /// Replace 1 - lap(phi) by max(1 - lap(phi), 1e-6) instead of failing.
  bool soft_guard = false;

  void validate() const;
  /// rho for the PDE residual and the penalties.
  Norm residual_norm() const { return kind == FormulationKind::PinnL1 ? Norm::L1 : Norm::L2; }
};

struct LossBreakdown {
  double total = 0.0;
  double first = 0.0;  // PDE residual or variational objective
  double boundary = 0.0;
  double initial = 0.0;
  double consistency = 0.0;
};

/// Columns (t, x_1..x_d) with one correction weight per column.
struct PointBatch {
  Eigen::MatrixXd points;
  std::vector<double> c;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  double t(std::size_t j) const { return points(0, static_cast<Eigen::Index>(j)); }
  std::span<const double> x(std::size_t j) const {
    return {points.col(static_cast<Eigen::Index>(j)).data() + 1, static_cast<std::size_t>(points.rows() - 1)};
  }
};

struct TrainingBatch {
  PointBatch interior;
  PointBatch initial;   // interior points moved to t = 0
  PointBatch boundary;  // empty unless a soft boundary penalty is active
};

TrainingBatch make_batch(std::span<const WeightedSample> interior, std::span<const BoundarySample> boundary);
/// n interior draws from the mixture, then n_boundary boundary draws.
TrainingBatch draw_batch(Rng& rng, const MixtureSampler& sampler, const DomainSpec& domain, std::size_t n,
                         std::size_t n_boundary);

// ---------------------------------------------------------------------------
// Per-sample terms

template <class T>
T rho(const T& r, Norm n) {
  return n == Norm::L2 ? square(r) : abs(r);
}

template <class T>
T pinn_pde_term(const SpaceTimeDerivsT<T>& u, Norm n) {
  return rho(qpme_residual(u), n);
}

/// 1 - lap(phi) after the admissibility checks (or the soft hinge).
template <class T>
T phi_denominator(const T& lap, bool soft_guard) {
  const T den = 1.0 - lap;
  const double v = value_of(den);
  if (soft_guard) return v < kSoftGuardFloor ? T(kSoftGuardFloor) : den;
  if (std::fabs(v) < kSingularDenominator)
    throw SingularDenominatorError("singular denominator 1 - lap(phi) = " + std::to_string(v));
  if (v < 0.0) throw ConstraintViolationError("1 - lap(phi) = " + std::to_string(v) + " < 0");
  return den;
}

/// (dphi/dt)^2 / (1 - lap phi) - 2 u0 dphi/dt.
template <class T>
T phi_objective_term(const PhiDerivs<T>& p, double u0, bool soft_guard) {
  const T den = phi_denominator(p.lap, soft_guard);
  return square(p.phit) / den - (2.0 * u0) * p.phit;
}

template <class T>
T phi_recovered_u(const PhiDerivs<T>& p, bool soft_guard) {
  return p.phit / phi_denominator(p.lap, soft_guard);
}

/// q^2 / sigma - 2 u0 q.
template <class T>
T qsigma_objective_term(const T& q, const T& sigma, double u0) {
  return square(q) / sigma - (2.0 * u0) * q;
}

template <class T>
T qsigma_consistency_term(const T& sigma_t, const T& lap_q, Norm n) {
  return rho(sigma_t + lap_q, n);
}

// ---------------------------------------------------------------------------
// Evaluator API: losses of arbitrary (possibly analytic) candidates.

struct PinnEvaluator {
  std::function<SpaceTimeDerivs(double, std::span<const double>)> derivs;
  std::function<double(double, std::span<const double>)> value;
};
using PhiEvaluator = std::function<PhiDerivs<double>(double, std::span<const double>)>;
struct QSigmaEvaluator {
  std::function<QSigmaDerivs<double>(double, std::span<const double>)> derivs;
  std::function<QSigmaValues<double>(double, std::span<const double>)> values;
};

LossBreakdown pinn_loss(const TrainingBatch& batch, const PinnEvaluator& u, const InitialCondition& u0,
                        const FormulationConfig& cfg, bool soft_bc);
LossBreakdown phi_loss(const TrainingBatch& batch, const PhiEvaluator& phi, const InitialCondition& u0,
                       const FormulationConfig& cfg);
LossBreakdown qsigma_loss(const TrainingBatch& batch, const QSigmaEvaluator& qs, const InitialCondition& u0,
                          const FormulationConfig& cfg);

// ---------------------------------------------------------------------------
// Network-backed losses

/// Ansatz, networks and problem data. Parameters of several networks are
/// stored back to back in one vector in the order of `nets`.
struct Model {
  AnsatzKind ansatz;
  std::vector<MlpSpec> nets;
  DomainSpec domain;
  InitialCondition u0;

  std::size_t num_params() const;
  std::size_t offset(std::size_t net) const;
  std::span<const double> net_params(const ParamVector& all, std::size_t net) const;
  ParamVector net_param_vector(const ParamVector& all, std::size_t net) const;
  void validate() const;
  /// Formulation and ansatz must agree (PINN kinds with PINN losses, ...).
  void check_compatible(const FormulationConfig& cfg) const;
  bool soft_bc() const { return !has_hard_bc(ansatz); }
};

ParamVector init_model_params(const Model& model, Rng& rng);

PinnEvaluator pinn_network(const Model& model, const ParamVector& params);
PhiEvaluator phi_network(const Model& model, const ParamVector& params);
QSigmaEvaluator qsigma_network(const Model& model, const ParamVector& params);

struct LossEvaluation {
  LossBreakdown loss;
  std::vector<double> grad;  // empty when not requested
};

/// Fast path: batched jet kernels over fixed chunks (OpenMP), per-sample taped
/// heads, chunk-ordered reduction.
LossEvaluation evaluate_loss(const Model& model, const FormulationConfig& cfg, const ParamVector& params,
                             const TrainingBatch& batch, bool want_grad = true);

/// Serial reference: the whole loss recorded on one tape through the scalar
/// network path.
LossEvaluation reference_loss(const Model& model, const FormulationConfig& cfg, const ParamVector& params,
                              const TrainingBatch& batch);

// ---------------------------------------------------------------------------

struct L1Contraction {
  double lhs;     // || u(t) - u_hat(t) ||_1
  double rhs;     // || u0 - u_hat(0) ||_1 + int_0^t || residual(u_hat) ||_1
  double lhs_se;  // Monte Carlo standard errors
  double rhs_se;
};

/// Uniform Monte Carlo over Omega (and [0, t] x Omega for the residual) with
/// n_mc samples per integral.
L1Contraction l1_contraction_check(const PinnEvaluator& u_hat, const BarenblattSpec& exact, const DomainSpec& domain,
                                   double t, std::size_t n_mc, Rng& rng);

/// mean_j c_j U(t_j, X_j)^2 over the interior batch, the same sample stream as
/// the objective.
double exact_square_mean(const TrainingBatch& batch, const BarenblattSpec& exact);

}  // namespace qpme
