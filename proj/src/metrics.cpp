#include "qpme/metrics.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <ostream>

#include "qpme/batch_jet.hpp"
#include "qpme/parallel.hpp"

namespace qpme {

SliceEvaluator pointwise(std::function<SlicePoint(double, std::span<const double>)> f) {
  return [f](const Eigen::MatrixXd& pts) {
    std::vector<SlicePoint> out(static_cast<std::size_t>(pts.cols()));
    for (Eigen::Index j = 0; j < pts.cols(); ++j)
      out[static_cast<std::size_t>(j)] = f(pts(0, j), {pts.col(j).data() + 1, static_cast<std::size_t>(pts.rows() - 1)});
    return out;
  };
}

double SliceGrid::cell_weight() const {
  const double h = 2.0 * a / static_cast<double>(n);
  return d == 1 ? h : h * h;
}

SliceGrid eval_slice(const SliceEvaluator& f, const DomainSpec& domain, double t, double c, std::size_t n) {
  domain.validate();
  if (n == 0) throw ContractError("slice needs n >= 1");
  SliceGrid g;
  g.t = t;
  g.c = c;
  g.n = n;
  g.d = domain.d;
  g.a = domain.half_widths[0];
  if (domain.d >= 2 && domain.half_widths[1] != g.a) throw ContractError("slice needs equal half widths on x and y");
  const std::size_t total = n * g.ny();
  g.values.assign(total, 0.0);
  g.grad.assign(total, {0.0, 0.0});
  const Eigen::Index D = static_cast<Eigen::Index>(domain.d + 1);
  const std::size_t chunks = (total + kChunk - 1) / kChunk;
  std::vector<std::exception_ptr> errors(chunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(chunks); ++ci) {
    const std::size_t begin = static_cast<std::size_t>(ci) * kChunk;
    const std::size_t end = std::min(total, begin + kChunk);
    try {
      Eigen::MatrixXd pts = Eigen::MatrixXd::Constant(D, static_cast<Eigen::Index>(end - begin), c);
      for (std::size_t k = begin; k < end; ++k) {
        const Eigen::Index col = static_cast<Eigen::Index>(k - begin);
        pts(0, col) = t;
        pts(1, col) = g.coordinate(k % n);
        if (domain.d >= 2) pts(2, col) = g.coordinate(k / n);
      }
      const std::vector<SlicePoint> v = f(pts);
      for (std::size_t k = begin; k < end; ++k) {
        const SlicePoint& p = v[k - begin];
        if (!std::isfinite(p.u) || !std::isfinite(p.gx) || !std::isfinite(p.gy))
          throw NonFiniteError("slice evaluator returned a non-finite value at node " + std::to_string(k % n) + "," +
                               std::to_string(k / n));
        g.values[k] = p.u;
        g.grad[k] = {p.gx, p.gy};
      }
    } catch (...) {
      errors[static_cast<std::size_t>(ci)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return g;
}

namespace {

SliceNorms norms_of(const SliceGrid& g, const SliceGrid* minus) {
  double s1 = 0.0, s2 = 0.0, sg = 0.0;
  for (std::size_t k = 0; k < g.values.size(); ++k) {
    const double u = g.values[k] - (minus ? minus->values[k] : 0.0);
    const double gx = g.grad[k][0] - (minus ? minus->grad[k][0] : 0.0);
    const double gy = g.grad[k][1] - (minus ? minus->grad[k][1] : 0.0);
    s1 += std::fabs(u);
    s2 += u * u;
    sg += gx * gx + gy * gy;
  }
  const double w = g.cell_weight();
  return {w * s1, std::sqrt(w * s2), std::sqrt(w * (s2 + sg))};
}

void check_congruent(const SliceGrid& a, const SliceGrid& b) {
  if (a.n != b.n || a.d != b.d || a.a != b.a || a.t != b.t || a.c != b.c || a.values.size() != b.values.size())
    throw ContractError("slice grids are not congruent");
}

}  // namespace

SliceNorms slice_norms(const SliceGrid& g) { return norms_of(g, nullptr); }

RelativeErrors relative_errors(const SliceGrid& pred, const SliceGrid& exact) {
  check_congruent(pred, exact);
  const SliceNorms e = norms_of(pred, &exact);
  const SliceNorms x = norms_of(exact, nullptr);
  if (x.l1 == 0.0 || x.l2 == 0.0 || x.h1 == 0.0) throw DomainError("relative error undefined: exact slice is zero");
  return {e.l1 / x.l1, e.l2 / x.l2, e.h1 / x.h1};
}

SliceEvaluator exact_slice_evaluator(const BarenblattSpec& exact) {
  return pointwise([exact](double t, std::span<const double> x) {
    const auto s = barenblatt_derivs(exact, t, x);
    return SlicePoint{s.u, s.grad[0], x.size() >= 2 ? s.grad[1] : 0.0};
  });
}

namespace {

SliceEvaluator batched_model_evaluator(const Model& m, const ParamVector& params) {
  std::vector<ParamVector> net_params;
  for (std::size_t k = 0; k < m.nets.size(); ++k) net_params.push_back(m.net_param_vector(params, k));
  return [m, net_params](const Eigen::MatrixXd& pts) {
    std::vector<BatchJetKernel> kernels;
    kernels.reserve(m.nets.size());
    std::vector<const BatchJets*> outs;
    for (std::size_t k = 0; k < m.nets.size(); ++k) {
      kernels.emplace_back(m.nets[k], JetMode::Full);
      outs.push_back(&kernels.back().forward(net_params[k], pts));
    }
    const std::size_t d = m.domain.d;
    std::vector<SlicePoint> out(static_cast<std::size_t>(pts.cols()));
    std::array<NetJets<double>, 2> nj;
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      for (std::size_t k = 0; k < m.nets.size(); ++k) {
        nj[k].value = outs[k]->value[j];
        nj[k].first.assign(outs[k]->first.col(j).data(), outs[k]->first.col(j).data() + d + 1);
        nj[k].second.assign(outs[k]->second.col(j).data(), outs[k]->second.col(j).data() + d);
      }
      const double t = pts(0, j);
      const std::span<const double> x(pts.col(j).data() + 1, d);
      const FdcJets<double> f = fdc_jets<double>(x, m.domain.half_widths);
      SlicePoint& p = out[static_cast<std::size_t>(j)];
      if (is_pinn(m.ansatz)) {
        const U0Jets u0 = has_hard_ic(m.ansatz) ? U0Jets::from(m.u0, x)
                                                : U0Jets{0.0, std::vector<double>(d), std::vector<double>(d)};
        const auto s = pinn_derivs(m.ansatz, nj[0], t, f, u0);
        p = {s.u, s.grad[0], d >= 2 ? s.grad[1] : 0.0};
      } else {
        QSigmaDerivs<double> r;
        if (m.ansatz == AnsatzKind::QSigmaGrowing && !(t > 0.0)) {
          const auto v = qsigma_values<double>(m.ansatz, nj[0].value, nj[1].value, t, m.domain.T, f.value, d);
          r.q = v.q;
          r.sigma = v.sigma;
          r.grad_q.assign(d, 0.0);
          r.grad_sigma.assign(d, 0.0);
          // The t = 0 slice of the growing wrapper only needs first spatial derivatives.
          for (std::size_t k = 0; k < d; ++k) {
            const Jet2<double> jq = f.axis(k) * softplus(nj[0].spatial(k));
            r.grad_q[k] = jq.d1;
            r.grad_sigma[k] = m.domain.T * sigmoid(nj[1].value) * nj[1].first[k + 1];
          }
        } else {
          r = qsigma_derivs(m.ansatz, nj[0], nj[1], t, m.domain.T, f);
        }
        const double s2 = r.sigma * r.sigma;
        p.u = r.q / r.sigma;
        p.gx = (r.grad_q[0] * r.sigma - r.q * r.grad_sigma[0]) / s2;
        p.gy = d >= 2 ? (r.grad_q[1] * r.sigma - r.q * r.grad_sigma[1]) / s2 : 0.0;
      }
    }
    return out;
  };
}

/// u_phi = phi_t / (1 - lap phi) and its x/y derivatives, which need third
/// derivatives of the network: one Dual-seeded jet sweep per slice direction.
SliceEvaluator phi_model_evaluator(const Model& m, const ParamVector& params) {
  const ParamVector p = m.net_param_vector(params, 0);
  return pointwise([m, p](double t, std::span<const double> x) {
    const std::size_t d = x.size();
    SlicePoint out;
    for (std::size_t dir = 0; dir < std::min<std::size_t>(d, 2); ++dir) {
      std::vector<Dual> xd(x.begin(), x.end());
      xd[dir].d = 1.0;
      const NetJets<Dual> nj = net_jets_generic<double, Dual>(m.nets[0], p.view(), Dual(t), xd);
      const PhiDerivs<Dual> ph = phi_derivs(nj, t, m.domain.T, fdc_jets<Dual>(xd, m.domain.half_widths));
      const Dual u = recover_u_phi(ph).u;
      out.u = u.v;
      (dir == 0 ? out.gx : out.gy) = u.d;
    }
    return out;
  });
}

}  // namespace

SliceEvaluator model_slice_evaluator(const Model& m, const ParamVector& params) {
  m.validate();
  if (params.size() != m.num_params()) throw ContractError("parameter vector does not match the model");
  if (m.ansatz == AnsatzKind::PhiHardBc) return phi_model_evaluator(m, params);
  return batched_model_evaluator(m, params);
}

ConstraintReport constraint_audit(const PhiEvaluator& phi, const PointBatch& points, double T) {
  ConstraintReport r;
  r.samples = points.size();
  r.min_denominator = std::numeric_limits<double>::infinity();
  std::size_t bad_den = 0, neg = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double t = points.t(j);
    const auto x = points.x(j);
    const PhiDerivs<double> p = phi(t, x);
    const double den = 1.0 - p.lap;
    r.min_denominator = std::min(r.min_denominator, den);
    if (den < std::pow(t / T, growing_exponent(x.size()))) ++bad_den;
    if (den != 0.0 && p.phit / den < 0.0) ++neg;
  }
  const double n = static_cast<double>(std::max<std::size_t>(points.size(), 1));
  r.denominator_violation = static_cast<double>(bad_den) / n;
  r.negative_u = static_cast<double>(neg) / n;
  return r;
}

ConstraintReport constraint_audit(const QSigmaEvaluator& qs, const PointBatch& points, double T) {
  ConstraintReport r;
  r.samples = points.size();
  r.min_denominator = std::numeric_limits<double>::infinity();
  std::size_t bad_sigma = 0, neg = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double t = points.t(j);
    const auto x = points.x(j);
    const QSigmaValues<double> v = qs.values(t, x);
    r.min_denominator = std::min(r.min_denominator, v.sigma);
    if (v.sigma < std::pow(t / T, growing_exponent(x.size()))) ++bad_sigma;
    if (v.q / v.sigma < 0.0) ++neg;
  }
  const double n = static_cast<double>(std::max<std::size_t>(points.size(), 1));
  r.sigma_violation = static_cast<double>(bad_sigma) / n;
  r.negative_u = static_cast<double>(neg) / n;
  return r;
}

void write_slice_csv(std::ostream& os, const SliceGrid& g) {
  os << "x,y,value,gx,gy\n";
  os.precision(17);
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 0; i < g.n; ++i) {
      const std::size_t k = j * g.n + i;
      os << g.coordinate(i) << ',' << (g.d == 1 ? 0.0 : g.coordinate(j)) << ',' << g.values[k] << ',' << g.grad[k][0]
         << ',' << g.grad[k][1] << '\n';
    }
}

}  // namespace qpme
