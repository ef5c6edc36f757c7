#include "qpme/ansatz.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <utility>

namespace qpme {

namespace {

constexpr std::array<std::pair<AnsatzKind, const char*>, 6> kNames{{
    {AnsatzKind::PinnHardIcHardBc, "pinn-hard-ic"},
    {AnsatzKind::PinnSoftIcHardBc, "pinn-soft-ic"},
    {AnsatzKind::PinnSoftIcSoftBc, "pinn-soft-ic-soft-bc"},
    {AnsatzKind::PhiHardBc, "phi"},
    {AnsatzKind::QSigma, "qsigma"},
    {AnsatzKind::QSigmaGrowing, "qsigma-growing"},
}};

std::vector<double> point(double t, std::span<const double> x) {
  std::vector<double> z(x.size() + 1);
  z[0] = t;
  std::copy(x.begin(), x.end(), z.begin() + 1);
  return z;
}

void check_point(std::span<const double> x, std::span<const double> half_widths) {
  if (x.size() != half_widths.size()) throw ContractError("point dimension does not match the domain");
}

}  // namespace

std::string to_string(AnsatzKind k) {
  for (const auto& [kind, name] : kNames)
    if (kind == k) return name;
  return "unknown";
}

AnsatzKind ansatz_from_string(const std::string& name) {
  for (const auto& [kind, n] : kNames)
    if (name == n) return kind;
  throw ContractError("unknown ansatz '" + name + "'");
}

bool is_pinn(AnsatzKind k) {
  return k == AnsatzKind::PinnHardIcHardBc || k == AnsatzKind::PinnSoftIcHardBc ||
         k == AnsatzKind::PinnSoftIcSoftBc;
}
bool is_qsigma(AnsatzKind k) { return k == AnsatzKind::QSigma || k == AnsatzKind::QSigmaGrowing; }
bool has_hard_bc(AnsatzKind k) { return k != AnsatzKind::PinnSoftIcSoftBc; }
bool has_hard_ic(AnsatzKind k) { return k == AnsatzKind::PinnHardIcHardBc; }
std::size_t network_count(AnsatzKind k) { return is_qsigma(k) ? 2 : 1; }

double f_dc(std::span<const double> x, std::span<const double> half_widths) {
  check_point(x, half_widths);
  double p = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    p *= (half_widths[i] - x[i]) * (half_widths[i] + x[i]) / (half_widths[i] * half_widths[i]);
  return p;
}

U0Jets U0Jets::from(const InitialCondition& ic, std::span<const double> x) {
  U0Jets j;
  j.d1.resize(x.size());
  j.d2.resize(x.size());
  j.value = ic.value(x);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const Jet2<double> a = ic.axis_jet(x, k);
    j.d1[k] = a.d1;
    j.d2[k] = a.d2;
  }
  return j;
}

SpaceTimeDerivs eval_u(AnsatzKind kind, const MlpSpec& spec, const ParamVector& params, double t,
                       std::span<const double> x, std::span<const double> half_widths, const InitialCondition& u0) {
  check_point(x, half_widths);
  if (spec.input_dim != x.size() + 1) throw ContractError("eval_u: network input dimension mismatch");
  const NetJets<double> n = net_jets_generic<double, double>(spec, params.view(), t, x);
  const FdcJets<double> f = fdc_jets<double>(x, half_widths);
  return pinn_derivs(kind, n, t, f, has_hard_ic(kind) ? U0Jets::from(u0, x) : U0Jets{0.0, std::vector<double>(x.size()), std::vector<double>(x.size())});
}

PhiDerivs<double> eval_phi(const MlpSpec& spec, const ParamVector& params, double t, std::span<const double> x,
                           std::span<const double> half_widths, double T) {
  check_point(x, half_widths);
  if (spec.input_dim != x.size() + 1) throw ContractError("eval_phi: network input dimension mismatch");
  const NetJets<double> n = net_jets_generic<double, double>(spec, params.view(), t, x);
  return phi_derivs(n, t, T, fdc_jets<double>(x, half_widths));
}

QSigmaPoint eval_q_sigma(AnsatzKind kind, const MlpSpec& spec_q, const ParamVector& params_q,
                         const MlpSpec& spec_sigma, const ParamVector& params_sigma, double t,
                         std::span<const double> x, std::span<const double> half_widths, double T) {
  check_point(x, half_widths);
  if (spec_q.input_dim != x.size() + 1 || spec_sigma.input_dim != x.size() + 1)
    throw ContractError("eval_q_sigma: network input dimension mismatch");
  QSigmaPoint out{};
  if (kind == AnsatzKind::QSigmaGrowing && !(t > 0.0)) {
    const std::vector<double> z = point(t, x);
    const QSigmaValues<double> v =
        qsigma_values<double>(kind, mlp_forward(spec_q, params_q, z), mlp_forward(spec_sigma, params_sigma, z), t,
                              T, f_dc(x, half_widths), x.size());
    out.q = v.q;
    out.sigma = v.sigma;
    out.u.u = v.q / v.sigma;
    out.u.denominator = v.sigma;
    out.sigma_t = std::numeric_limits<double>::infinity();
    out.lap_q = 0.0;
    return out;
  }
  const NetJets<double> nq = net_jets_generic<double, double>(spec_q, params_q.view(), t, x);
  const NetJets<double> ns = net_jets_generic<double, double>(spec_sigma, params_sigma.view(), t, x);
  const QSigmaDerivs<double> r = qsigma_derivs(kind, nq, ns, t, T, fdc_jets<double>(x, half_widths));
  out.q = r.q;
  out.sigma = r.sigma;
  out.sigma_t = r.sigma_t;
  out.lap_q = r.lap_q;
  out.u.u = r.q / r.sigma;
  out.u.denominator = r.sigma;
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    g[k] = (r.grad_q[k] * r.sigma - r.q * r.grad_sigma[k]) / (r.sigma * r.sigma);
  out.u.grad = std::move(g);
  return out;
}

}  // namespace qpme
