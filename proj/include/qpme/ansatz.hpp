#pragma once

// Constraint-imposing wrappers around raw networks. Every wrapper is written
// once as a template over the scalar type so the training path (taped Var),
// evaluation (double) and slice gradients of recovered solutions (Dual)
// share the same algebra. Products with f_dc and the time factors are formed
// with Jet2 arithmetic per spatial axis, which applies the product and chain
// rules exactly.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpme/analytic.hpp"
#include "qpme/errors.hpp"
#include "qpme/jet.hpp"
#include "qpme/mlp.hpp"
#include "qpme/spacetime.hpp"

namespace qpme {

enum class AnsatzKind {
  PinnHardIcHardBc,  // u = u0 + t f_dc NN
  PinnSoftIcHardBc,  // u = f_dc softplus(NN)
  PinnSoftIcSoftBc,  // u = softplus(NN)
  PhiHardBc,         // phi = (T - t) f_dc NN
  QSigma,            // q = f_dc softplus(NN_q), sigma = softplus(ln(e - 1) + (T - t) NN_s)
  QSigmaGrowing,     // sigma = (t/T)^(d/(d+2)) + (T - t) softplus(NN_s)
};

std::string to_string(AnsatzKind k);
AnsatzKind ansatz_from_string(const std::string& name);
bool is_pinn(AnsatzKind k);
bool is_qsigma(AnsatzKind k);
bool has_hard_bc(AnsatzKind k);
bool has_hard_ic(AnsatzKind k);
std::size_t network_count(AnsatzKind k);

inline constexpr double kSingularDenominator = 1e-10;
inline constexpr double kDegenerateSigma = 1e-12;

/// f_dc(x) = prod_i (a_i - x_i)(a_i + x_i) / a_i^2 with per-axis derivatives.
template <class S>
struct FdcJets {
  S value{};
  std::vector<S> d1;
  std::vector<S> d2;

  Jet2<S> axis(std::size_t k) const { return {value, d1[k], d2[k]}; }
};

template <class S>
FdcJets<S> fdc_jets(std::span<const S> x, std::span<const double> half_widths) {
  const std::size_t d = x.size();
  if (half_widths.size() != d) throw ContractError("f_dc: half widths do not match dimension");
  std::vector<S> g(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double a2 = half_widths[i] * half_widths[i];
    g[i] = (half_widths[i] - x[i]) * (half_widths[i] + x[i]) / a2;
  }
  // Products excluding one factor via prefix/suffix sweeps (safe on the boundary).
  std::vector<S> prefix(d + 1, S(1.0));
  std::vector<S> suffix(d + 1, S(1.0));
  for (std::size_t i = 0; i < d; ++i) prefix[i + 1] = prefix[i] * g[i];
  for (std::size_t i = d; i-- > 0;) suffix[i] = suffix[i + 1] * g[i];
  FdcJets<S> out;
  out.value = prefix[d];
  out.d1.resize(d);
  out.d2.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double a2 = half_widths[k] * half_widths[k];
    const S rest = prefix[k] * suffix[k + 1];
    out.d1[k] = rest * (-2.0 * x[k] / a2);
    out.d2[k] = rest * S(-2.0 / a2);
  }
  return out;
}

double f_dc(std::span<const double> x, std::span<const double> half_widths);

template <class S>
FdcJets<S> lift(const FdcJets<double>& f) {
  FdcJets<S> out;
  out.value = S(f.value);
  out.d1.assign(f.d1.begin(), f.d1.end());
  out.d2.assign(f.d2.begin(), f.d2.end());
  return out;
}

/// u0 with per-axis jets, as needed by the hard-IC ansatz.
struct U0Jets {
  double value = 0.0;
  std::vector<double> d1;
  std::vector<double> d2;

  static U0Jets from(const InitialCondition& ic, std::span<const double> x);
};

/// Network outputs at one point: value, first derivatives along every input
/// (index 0 is time) and second derivatives along the spatial inputs.
template <class S>
struct NetJets {
  S value{};
  std::vector<S> first;
  std::vector<S> second;

  std::size_t spatial_dim() const { return second.size(); }
  /// Jet along spatial axis k (input k + 1).
  Jet2<S> spatial(std::size_t k) const { return {value, first[k + 1], second[k]}; }
  const S& dt() const { return first[0]; }
};

/// D jet passes of the scalar network path; z = (t, x).
template <class P, class S>
NetJets<S> net_jets_generic(const MlpSpec& spec, std::span<const P> params, const S& t, std::span<const S> x) {
  std::vector<S> z(x.size() + 1);
  z[0] = t;
  for (std::size_t i = 0; i < x.size(); ++i) z[i + 1] = x[i];
  NetJets<S> out;
  out.first.resize(z.size());
  out.second.resize(x.size());
  const Jet2<S> jt = mlp_jet_generic<P, S>(spec, params, z, 0);
  out.value = jt.v;
  out.first[0] = jt.d1;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const Jet2<S> jk = mlp_jet_generic<P, S>(spec, params, z, k + 1);
    out.first[k + 1] = jk.d1;
    out.second[k] = jk.d2;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PINN ansatz

template <class S>
SpaceTimeDerivsT<S> pinn_derivs(AnsatzKind kind, const NetJets<S>& n, double t, const FdcJets<S>& f,
                                const U0Jets& u0) {
  const std::size_t d = n.spatial_dim();
  SpaceTimeDerivsT<S> out;
  out.grad.resize(d);
  out.lap = S(0.0);
  switch (kind) {
    case AnsatzKind::PinnSoftIcHardBc: {
      const S sp = softplus(n.value);
      out.u = f.value * sp;
      out.ut = f.value * sigmoid(n.value) * n.dt();
      for (std::size_t k = 0; k < d; ++k) {
        const Jet2<S> j = f.axis(k) * softplus(n.spatial(k));
        out.grad[k] = j.d1;
        out.lap += j.d2;
      }
      break;
    }
    case AnsatzKind::PinnSoftIcSoftBc: {
      out.u = softplus(n.value);
      out.ut = sigmoid(n.value) * n.dt();
      for (std::size_t k = 0; k < d; ++k) {
        const Jet2<S> j = softplus(n.spatial(k));
        out.grad[k] = j.d1;
        out.lap += j.d2;
      }
      break;
    }
    case AnsatzKind::PinnHardIcHardBc: {
      out.u = u0.value + t * (f.value * n.value);
      out.ut = f.value * n.value + t * (f.value * n.dt());
      for (std::size_t k = 0; k < d; ++k) {
        const Jet2<S> fn = f.axis(k) * n.spatial(k);
        out.grad[k] = u0.d1[k] + t * fn.d1;
        out.lap += u0.d2[k] + t * fn.d2;
      }
      break;
    }
    default:
      throw ContractError("pinn_derivs: " + to_string(kind) + " is not a PINN ansatz");
  }
  return out;
}

template <class S>
S pinn_value(AnsatzKind kind, const S& net_value, double t, const S& fdc, double u0) {
  switch (kind) {
    case AnsatzKind::PinnSoftIcHardBc: return fdc * softplus(net_value);
    case AnsatzKind::PinnSoftIcSoftBc: return softplus(net_value);
    case AnsatzKind::PinnHardIcHardBc: return u0 + t * (fdc * net_value);
    default: throw ContractError("pinn_value: " + to_string(kind) + " is not a PINN ansatz");
  }
}

// ---------------------------------------------------------------------------
// phi formulation

template <class S>
struct PhiDerivs {
  S phi{};
  S phit{};
  S lap{};
};

template <class S>
PhiDerivs<S> phi_derivs(const NetJets<S>& n, double t, double T, const FdcJets<S>& f) {
  const double tau = T - t;
  PhiDerivs<S> out;
  out.phi = tau * (f.value * n.value);
  out.phit = tau * (f.value * n.dt()) - f.value * n.value;
  out.lap = S(0.0);
  for (std::size_t k = 0; k < n.spatial_dim(); ++k) out.lap += (f.axis(k) * n.spatial(k)).d2;
  out.lap = tau * out.lap;
  return out;
}

template <class S>
struct RecoveredSolutionT {
  S u{};
  std::optional<S> ut;
  std::optional<std::vector<S>> grad;
  std::optional<S> lap;
  S denominator{};
};
using RecoveredSolution = RecoveredSolutionT<double>;

/// u = dphi/dt / (1 - lap(phi)).
template <class S>
RecoveredSolutionT<S> recover_u_phi(const PhiDerivs<S>& p) {
  const S den = 1.0 - p.lap;
  if (std::fabs(value_of(den)) < kSingularDenominator)
    throw SingularDenominatorError("singular denominator 1 - lap(phi) = " + std::to_string(value_of(den)));
  RecoveredSolutionT<S> r;
  r.denominator = den;
  r.u = p.phit / den;
  return r;
}

// ---------------------------------------------------------------------------
// q-sigma formulation

template <class S>
struct QSigmaValues {
  S q{};
  S sigma{};
};

template <class S>
struct QSigmaDerivs {
  S q{};
  S sigma{};
  S sigma_t{};
  S lap_q{};
  std::vector<S> grad_q;
  std::vector<S> grad_sigma;
};

inline double growing_exponent(std::size_t d) { return static_cast<double>(d) / (static_cast<double>(d) + 2.0); }

/// sigma(T, .) = 1 for the plain wrapper: softplus(ln(e - 1)) = 1.
inline double sigma_offset() { return std::log(std::numbers::e - 1.0); }

template <class S>
QSigmaValues<S> qsigma_values(AnsatzKind kind, const S& nq, const S& ns, double t, double T, const S& fdc,
                              std::size_t d) {
  QSigmaValues<S> out;
  out.q = fdc * softplus(nq);
  const double tau = T - t;
  if (kind == AnsatzKind::QSigma) {
    out.sigma = softplus(sigma_offset() + tau * ns);
  } else if (kind == AnsatzKind::QSigmaGrowing) {
    out.sigma = std::pow(t / T, growing_exponent(d)) + tau * softplus(ns);
  } else {
    throw ContractError("qsigma_values: " + to_string(kind) + " is not a q-sigma ansatz");
  }
  if (value_of(out.sigma) < kDegenerateSigma)
    throw ConstraintViolationError("degenerate sigma = " + std::to_string(value_of(out.sigma)));
  return out;
}

template <class S>
QSigmaDerivs<S> qsigma_derivs(AnsatzKind kind, const NetJets<S>& nq, const NetJets<S>& ns, double t, double T,
                              const FdcJets<S>& f) {
  const std::size_t d = nq.spatial_dim();
  const double tau = T - t;
  QSigmaDerivs<S> out;
  out.grad_q.resize(d);
  out.grad_sigma.resize(d);
  out.lap_q = S(0.0);
  for (std::size_t k = 0; k < d; ++k) {
    const Jet2<S> j = f.axis(k) * softplus(nq.spatial(k));
    out.grad_q[k] = j.d1;
    out.lap_q += j.d2;
  }
  out.q = f.value * softplus(nq.value);
  if (kind == AnsatzKind::QSigma) {
    const S z = sigma_offset() + tau * ns.value;
    const S s = sigmoid(z);
    out.sigma = softplus(z);
    out.sigma_t = s * (tau * ns.dt() - ns.value);
    for (std::size_t k = 0; k < d; ++k) out.grad_sigma[k] = s * (tau * ns.first[k + 1]);
  } else if (kind == AnsatzKind::QSigmaGrowing) {
    const double e = growing_exponent(d);
    if (!(t > 0.0)) throw DomainError("growing sigma: d sigma/dt is unbounded at t = 0");
    const S s = sigmoid(ns.value);
    out.sigma = std::pow(t / T, e) + tau * softplus(ns.value);
    out.sigma_t = (e / T) * std::pow(t / T, e - 1.0) - softplus(ns.value) + tau * (s * ns.dt());
    for (std::size_t k = 0; k < d; ++k) out.grad_sigma[k] = tau * (s * ns.first[k + 1]);
  } else {
    throw ContractError("qsigma_derivs: " + to_string(kind) + " is not a q-sigma ansatz");
  }
  if (value_of(out.sigma) < kDegenerateSigma)
    throw ConstraintViolationError("degenerate sigma = " + std::to_string(value_of(out.sigma)));
  return out;
}

// ---------------------------------------------------------------------------
// Public single-point evaluators on the scalar path.

SpaceTimeDerivs eval_u(AnsatzKind kind, const MlpSpec& spec, const ParamVector& params, double t,
                       std::span<const double> x, std::span<const double> half_widths, const InitialCondition& u0);

PhiDerivs<double> eval_phi(const MlpSpec& spec, const ParamVector& params, double t, std::span<const double> x,
                           std::span<const double> half_widths, double T);

struct QSigmaPoint {
  double q;
  double sigma;
  RecoveredSolution u;
  double sigma_t;
  double lap_q;
};

QSigmaPoint eval_q_sigma(AnsatzKind kind, const MlpSpec& spec_q, const ParamVector& params_q,
                         const MlpSpec& spec_sigma, const ParamVector& params_sigma, double t,
                         std::span<const double> x, std::span<const double> half_widths, double T);

}  // namespace qpme
