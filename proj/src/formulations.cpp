#include "qpme/formulations.hpp"

#include <array>
#include <exception>
#include <sstream>

#include "qpme/batch_jet.hpp"
#include "qpme/parallel.hpp"
#include "qpme/tape.hpp"

namespace qpme {

std::string to_string(FormulationKind k) {
  switch (k) {
    case FormulationKind::PinnL2: return "pinn-l2";
    case FormulationKind::PinnL1: return "pinn-l1";
    case FormulationKind::Phi: return "phi";
    case FormulationKind::QSigma: return "qsigma";
  }
  return "unknown";
}

FormulationKind formulation_from_string(const std::string& name) {
  for (FormulationKind k : {FormulationKind::PinnL2, FormulationKind::PinnL1, FormulationKind::Phi, FormulationKind::QSigma})
    if (to_string(k) == name) return k;
  throw ContractError("unknown formulation '" + name + "' (expected pinn-l2, pinn-l1, phi or qsigma)");
}

std::string to_string(Norm n) { return n == Norm::L1 ? "l1" : "l2"; }

Norm norm_from_string(const std::string& name) {
  if (name == "l1") return Norm::L1;
  if (name == "l2") return Norm::L2;
  throw ContractError("unknown norm '" + name + "' (expected l1 or l2)");
}

void FormulationConfig::validate() const {
  for (double w : {kappa, mu, nu, gamma})
    if (!std::isfinite(w) || w < 0.0) throw ContractError("loss weights must be finite and nonnegative");
}

TrainingBatch make_batch(std::span<const WeightedSample> interior, std::span<const BoundarySample> boundary) {
  TrainingBatch b;
  if (interior.empty()) throw ContractError("interior batch must not be empty");
  const Eigen::Index D = static_cast<Eigen::Index>(interior.front().x.size() + 1);
  const Eigen::Index n = static_cast<Eigen::Index>(interior.size());
  b.interior.points.resize(D, n);
  b.interior.c.resize(interior.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& s = interior[static_cast<std::size_t>(j)];
    b.interior.points(0, j) = s.t;
    for (Eigen::Index i = 1; i < D; ++i) b.interior.points(i, j) = s.x[static_cast<std::size_t>(i - 1)];
    b.interior.c[static_cast<std::size_t>(j)] = s.c;
  }
  b.initial = b.interior;
  b.initial.points.row(0).setZero();
  b.boundary.points.resize(D, static_cast<Eigen::Index>(boundary.size()));
  b.boundary.c.assign(boundary.size(), 1.0);
  for (std::size_t j = 0; j < boundary.size(); ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    b.boundary.points(0, jj) = boundary[j].t;
    for (Eigen::Index i = 1; i < D; ++i) b.boundary.points(i, jj) = boundary[j].x[static_cast<std::size_t>(i - 1)];
  }
  return b;
}

TrainingBatch draw_batch(Rng& rng, const MixtureSampler& sampler, const DomainSpec& domain, std::size_t n,
                         std::size_t n_boundary) {
  const std::vector<WeightedSample> in = sampler.sample(rng, n);
  std::vector<BoundarySample> bd;
  bd.reserve(n_boundary);
  for (std::size_t j = 0; j < n_boundary; ++j) bd.push_back(sample_boundary(rng, domain));
  return make_batch(in, bd);
}

namespace {

std::string where(const char* term, std::size_t j, double t, std::span<const double> x) {
  std::ostringstream os;
  os.precision(6);
  os << " [" << term << " term, sample " << j << ", t=" << t << ", x=(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ")]";
  return os.str();
}

/// Re-raises the active exception with sample context appended, keeping its type.
[[noreturn]] void rethrow_with(const std::string& ctx) {
  try {
    throw;
  } catch (const SingularDenominatorError& e) {
    throw SingularDenominatorError(e.what() + ctx);
  } catch (const ConstraintViolationError& e) {
    throw ConstraintViolationError(e.what() + ctx);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(e.what() + ctx);
  } catch (const DomainError& e) {
    throw DomainError(e.what() + ctx);
  }
}

void check_finite(double v, const char* term, std::size_t j, double t, std::span<const double> x) {
  if (!std::isfinite(v)) throw NonFiniteError("non-finite value " + std::to_string(v) + where(term, j, t, x));
}

double mean(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

void finish(LossBreakdown& l, const FormulationConfig& cfg) {
  l.total = cfg.kappa * l.first + cfg.mu * l.boundary + cfg.nu * l.initial + cfg.gamma * l.consistency;
}

double first_weight(const FormulationConfig& cfg, double c) {
  if (cfg.kind == FormulationKind::Phi || cfg.kind == FormulationKind::QSigma) return c;
  return cfg.correction.pde ? c : 1.0;
}

U0Jets zero_u0(std::size_t d) { return U0Jets{0.0, std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)}; }

template <class T>
struct InteriorTerms {
  T first{};
  T consistency{};
};

template <class T>
InteriorTerms<T> interior_terms(const Model& m, const FormulationConfig& cfg, const NetJets<T>* nets, double t,
                                std::span<const double> x) {
  const FdcJets<T> f = lift<T>(fdc_jets<double>(x, m.domain.half_widths));
  switch (cfg.kind) {
    case FormulationKind::PinnL2:
    case FormulationKind::PinnL1: {
      const U0Jets u0 = has_hard_ic(m.ansatz) ? U0Jets::from(m.u0, x) : zero_u0(x.size());
      return {pinn_pde_term(pinn_derivs(m.ansatz, nets[0], t, f, u0), cfg.residual_norm()), T(0.0)};
    }
    case FormulationKind::Phi:
      return {phi_objective_term(phi_derivs(nets[0], t, m.domain.T, f), m.u0.value(x), cfg.soft_guard), T(0.0)};
    case FormulationKind::QSigma: {
      const QSigmaDerivs<T> r = qsigma_derivs(m.ansatz, nets[0], nets[1], t, m.domain.T, f);
      return {qsigma_objective_term(r.q, r.sigma, m.u0.value(x)),
              qsigma_consistency_term(r.sigma_t, r.lap_q, cfg.consistency_norm)};
    }
  }
  throw ContractError("unknown formulation");
}

template <class T>
T initial_term(const Model& m, const FormulationConfig& cfg, const NetJets<T>* nets, std::span<const double> x) {
  const double u0 = m.u0.value(x);
  const Norm n = cfg.residual_norm();
  switch (cfg.kind) {
    case FormulationKind::PinnL2:
    case FormulationKind::PinnL1:
      return rho(pinn_value<T>(m.ansatz, nets[0].value, 0.0, T(f_dc(x, m.domain.half_widths)), u0) - u0, n);
    case FormulationKind::Phi: {
      const FdcJets<T> f = lift<T>(fdc_jets<double>(x, m.domain.half_widths));
      return rho(phi_recovered_u(phi_derivs(nets[0], 0.0, m.domain.T, f), cfg.soft_guard) - u0, n);
    }
    case FormulationKind::QSigma: {
      const QSigmaValues<T> v = qsigma_values<T>(m.ansatz, nets[0].value, nets[1].value, 0.0, m.domain.T,
                                                 T(f_dc(x, m.domain.half_widths)), x.size());
      return rho(v.q / v.sigma - u0, n);
    }
  }
  throw ContractError("unknown formulation");
}

template <class T>
T boundary_term(const Model& m, const FormulationConfig& cfg, const NetJets<T>* nets, double t,
                std::span<const double> x) {
  return rho(pinn_value<T>(m.ansatz, nets[0].value, t, T(f_dc(x, m.domain.half_widths)), m.u0.value(x)),
             cfg.residual_norm());
}

enum class Part { Interior, Initial, Boundary };

JetMode mode_for(Part p, const FormulationConfig& cfg) {
  if (p == Part::Interior) return JetMode::Full;
  if (p == Part::Initial && cfg.kind == FormulationKind::Phi) return JetMode::Full;
  return JetMode::Value;
}

const char* part_name(Part p) {
  switch (p) {
    case Part::Interior: return "pde/objective";
    case Part::Initial: return "initial";
    case Part::Boundary: return "boundary";
  }
  return "?";
}

template <class T>
NetJets<T> column_jets(const BatchJets& o, Eigen::Index j, JetMode mode) {
  NetJets<T> n;
  n.value = T(o.value[j]);
  if (mode == JetMode::Full) {
    n.first.resize(static_cast<std::size_t>(o.first.rows()));
    n.second.resize(static_cast<std::size_t>(o.second.rows()));
    for (Eigen::Index k = 0; k < o.first.rows(); ++k) n.first[static_cast<std::size_t>(k)] = T(o.first(k, j));
    for (Eigen::Index k = 0; k < o.second.rows(); ++k) n.second[static_cast<std::size_t>(k)] = T(o.second(k, j));
  }
  return n;
}

NetJets<Var> leaf_jets(const BatchJets& o, Eigen::Index j, JetMode mode, Tape& tape) {
  NetJets<Var> n;
  n.value = Var::leaf(tape, o.value[j]);
  if (mode == JetMode::Full) {
    n.first.resize(static_cast<std::size_t>(o.first.rows()));
    n.second.resize(static_cast<std::size_t>(o.second.rows()));
    for (Eigen::Index k = 0; k < o.first.rows(); ++k) n.first[static_cast<std::size_t>(k)] = Var::leaf(tape, o.first(k, j));
    for (Eigen::Index k = 0; k < o.second.rows(); ++k)
      n.second[static_cast<std::size_t>(k)] = Var::leaf(tape, o.second(k, j));
  }
  return n;
}

void store_adjoints(const NetJets<Var>& n, const Tape& tape, Eigen::Index j, BatchJets& adj) {
  adj.value[j] = tape.adjoint(n.value.idx);
  for (std::size_t k = 0; k < n.first.size(); ++k) adj.first(static_cast<Eigen::Index>(k), j) = tape.adjoint(n.first[k].idx);
  for (std::size_t k = 0; k < n.second.size(); ++k)
    adj.second(static_cast<Eigen::Index>(k), j) = tape.adjoint(n.second[k].idx);
}

struct Task {
  Part part;
  std::size_t begin;
  std::size_t end;
};

struct TaskResult {
  double first = 0.0;  // weighted sums, not yet divided by the batch size
  double consistency = 0.0;
  double other = 0.0;  // initial or boundary
  std::vector<double> grad;
  std::exception_ptr error;
};

struct Scales {
  double first, consistency, initial, boundary;
};

void run_task(const Model& m, const FormulationConfig& cfg, const std::vector<ParamVector>& net_params,
              const PointBatch& b, const Task& task, const Scales& scale, bool want_grad, TaskResult& out) {
  const std::size_t nn = m.nets.size();
  const JetMode mode = mode_for(task.part, cfg);
  const Eigen::Index n = static_cast<Eigen::Index>(task.end - task.begin);
  const Eigen::MatrixXd in = b.points.middleCols(static_cast<Eigen::Index>(task.begin), n);
  std::vector<BatchJetKernel> kernels;
  std::vector<const BatchJets*> outs;
  std::vector<BatchJets> adj(nn);
  kernels.reserve(nn);  // outs point into the kernels
  for (std::size_t k = 0; k < nn; ++k) {
    kernels.emplace_back(m.nets[k], mode);
    outs.push_back(&kernels.back().forward(net_params[k], in));
    if (want_grad) adj[k].resize(mode, in.rows(), n);
  }
  Tape tape;
  std::array<NetJets<Var>, 2> vj;
  std::array<NetJets<double>, 2> dj;
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t col = task.begin + static_cast<std::size_t>(j);
    const double t = b.t(col);
    const std::span<const double> x = b.x(col);
    const double c = b.c[col];
    try {
      double v1 = 0.0, v2 = 0.0;
      if (want_grad) {
        tape.clear();
        for (std::size_t k = 0; k < nn; ++k) vj[k] = leaf_jets(*outs[k], j, mode, tape);
        Var seed;
        if (task.part == Part::Interior) {
          const auto r = interior_terms<Var>(m, cfg, vj.data(), t, x);
          const double w1 = first_weight(cfg, c), w2 = cfg.correction.consistency ? c : 1.0;
          v1 = w1 * r.first.val;
          v2 = w2 * r.consistency.val;
          seed = (scale.first * w1) * r.first + (scale.consistency * w2) * r.consistency;
        } else if (task.part == Part::Initial) {
          const double w = cfg.correction.initial ? c : 1.0;
          const Var r = initial_term<Var>(m, cfg, vj.data(), x);
          v1 = w * r.val;
          seed = (scale.initial * w) * r;
        } else {
          const Var r = boundary_term<Var>(m, cfg, vj.data(), t, x);
          v1 = r.val;
          seed = scale.boundary * r;
        }
        // A constant seed leaves every adjoint at zero.
        tape.backward(seed.is_constant() ? -1 : seed.idx);
        for (std::size_t k = 0; k < nn; ++k) store_adjoints(vj[k], tape, j, adj[k]);
      } else {
        for (std::size_t k = 0; k < nn; ++k) dj[k] = column_jets<double>(*outs[k], j, mode);
        if (task.part == Part::Interior) {
          const auto r = interior_terms<double>(m, cfg, dj.data(), t, x);
          v1 = first_weight(cfg, c) * r.first;
          v2 = (cfg.correction.consistency ? c : 1.0) * r.consistency;
        } else if (task.part == Part::Initial) {
          v1 = (cfg.correction.initial ? c : 1.0) * initial_term<double>(m, cfg, dj.data(), x);
        } else {
          v1 = boundary_term<double>(m, cfg, dj.data(), t, x);
        }
      }
      check_finite(v1, part_name(task.part), col, t, x);
      check_finite(v2, "consistency", col, t, x);
      if (task.part == Part::Interior) {
        out.first += v1;
        out.consistency += v2;
      } else {
        out.other += v1;
      }
    } catch (const Error&) {
      rethrow_with(where(part_name(task.part), col, t, x));
    }
  }
  if (want_grad) {
    out.grad.assign(m.num_params(), 0.0);
    for (std::size_t k = 0; k < nn; ++k) {
      std::span<double> g(out.grad.data() + m.offset(k), m.nets[k].num_params());
      kernels[k].backward(net_params[k], adj[k], g);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t Model::num_params() const {
  std::size_t n = 0;
  for (const auto& s : nets) n += s.num_params();
  return n;
}

std::size_t Model::offset(std::size_t net) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < net; ++k) n += nets[k].num_params();
  return n;
}

std::span<const double> Model::net_params(const ParamVector& all, std::size_t net) const {
  return {all.data.data() + offset(net), nets[net].num_params()};
}

ParamVector Model::net_param_vector(const ParamVector& all, std::size_t net) const {
  const auto s = net_params(all, net);
  return ParamVector{{s.begin(), s.end()}};
}

void Model::validate() const {
  domain.validate();
  if (nets.size() != network_count(ansatz))
    throw ContractError(to_string(ansatz) + " needs " + std::to_string(network_count(ansatz)) + " network(s)");
  for (const auto& s : nets) {
    s.validate();
    if (s.input_dim != domain.d + 1) throw ContractError("network input_dim must be d + 1");
  }
  if (u0.dim() != domain.d) throw ContractError("initial condition dimension does not match the domain");
}

void Model::check_compatible(const FormulationConfig& cfg) const {
  const bool ok = ((cfg.kind == FormulationKind::PinnL2 || cfg.kind == FormulationKind::PinnL1) && is_pinn(ansatz)) ||
                  (cfg.kind == FormulationKind::Phi && ansatz == AnsatzKind::PhiHardBc) ||
                  (cfg.kind == FormulationKind::QSigma && is_qsigma(ansatz));
  if (!ok) throw ContractError("formulation " + to_string(cfg.kind) + " cannot train a " + to_string(ansatz) + " ansatz");
}

ParamVector init_model_params(const Model& model, Rng& rng) {
  ParamVector all;
  for (const auto& s : model.nets) {
    const ParamVector p = init_params(s, rng);
    all.data.insert(all.data.end(), p.data.begin(), p.data.end());
  }
  return all;
}

LossEvaluation evaluate_loss(const Model& m, const FormulationConfig& cfg, const ParamVector& params,
                             const TrainingBatch& batch, bool want_grad) {
  m.validate();
  m.check_compatible(cfg);
  cfg.validate();
  if (params.size() != m.num_params()) throw ContractError("parameter vector does not match the model");
  std::vector<ParamVector> net_params;
  for (std::size_t k = 0; k < m.nets.size(); ++k) net_params.push_back(m.net_param_vector(params, k));

  const bool with_boundary = m.soft_bc() && batch.boundary.size() > 0;
  std::vector<Task> tasks;
  auto add = [&](Part p, std::size_t n) {
    for (std::size_t s = 0; s < n; s += kChunk) tasks.push_back({p, s, std::min(n, s + kChunk)});
  };
  add(Part::Interior, batch.interior.size());
  add(Part::Initial, batch.initial.size());
  if (with_boundary) add(Part::Boundary, batch.boundary.size());

  const double ni = static_cast<double>(batch.interior.size());
  const Scales scale{cfg.kappa / ni, cfg.gamma / ni, cfg.nu / static_cast<double>(std::max<std::size_t>(batch.initial.size(), 1)),
                     cfg.mu / static_cast<double>(std::max<std::size_t>(batch.boundary.size(), 1))};
  std::vector<TaskResult> results(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(tasks.size()); ++i) {
    const Task& task = tasks[static_cast<std::size_t>(i)];
    const PointBatch& b =
        task.part == Part::Interior ? batch.interior : (task.part == Part::Initial ? batch.initial : batch.boundary);
    try {
      run_task(m, cfg, net_params, b, task, scale, want_grad, results[static_cast<std::size_t>(i)]);
    } catch (...) {
      results[static_cast<std::size_t>(i)].error = std::current_exception();
    }
  }

  LossEvaluation out;
  if (want_grad) out.grad.assign(m.num_params(), 0.0);
  double first = 0.0, cons = 0.0, init = 0.0, bnd = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const TaskResult& r = results[i];
    if (r.error) std::rethrow_exception(r.error);
    switch (tasks[i].part) {
      case Part::Interior:
        first += r.first;
        cons += r.consistency;
        break;
      case Part::Initial: init += r.other; break;
      case Part::Boundary: bnd += r.other; break;
    }
    if (want_grad)
      for (std::size_t p = 0; p < out.grad.size(); ++p) out.grad[p] += r.grad[p];
  }
  out.loss.first = mean(first, batch.interior.size());
  out.loss.consistency = cfg.kind == FormulationKind::QSigma ? mean(cons, batch.interior.size()) : 0.0;
  out.loss.initial = mean(init, batch.initial.size());
  out.loss.boundary = with_boundary ? mean(bnd, batch.boundary.size()) : 0.0;
  finish(out.loss, cfg);
  return out;
}

LossEvaluation reference_loss(const Model& m, const FormulationConfig& cfg, const ParamVector& params,
                              const TrainingBatch& batch) {
  m.validate();
  m.check_compatible(cfg);
  cfg.validate();
  if (params.size() != m.num_params()) throw ContractError("parameter vector does not match the model");
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (double p : params.data) leaves.push_back(Var::leaf(tape, p));
  const std::size_t nn = m.nets.size();
  auto net_leaves = [&](std::size_t k) { return std::span<const Var>(leaves.data() + m.offset(k), m.nets[k].num_params()); };

  auto jets_at = [&](double t, std::span<const double> x, JetMode mode, std::array<NetJets<Var>, 2>& out) {
    std::vector<Var> xv(x.begin(), x.end());
    for (std::size_t k = 0; k < nn; ++k) {
      if (mode == JetMode::Full) {
        out[k] = net_jets_generic<Var, Var>(m.nets[k], net_leaves(k), Var(t), xv);
      } else {
        std::vector<Var> z{Var(t)};
        z.insert(z.end(), xv.begin(), xv.end());
        out[k] = NetJets<Var>{};
        out[k].value = mlp_forward_generic<Var, Var>(m.nets[k], net_leaves(k), z);
      }
    }
  };

  std::array<NetJets<Var>, 2> nj;
  Var first(0.0), cons(0.0), init(0.0), bnd(0.0);
  for (std::size_t j = 0; j < batch.interior.size(); ++j) {
    const double t = batch.interior.t(j);
    const auto x = batch.interior.x(j);
    const double c = batch.interior.c[j];
    try {
      jets_at(t, x, JetMode::Full, nj);
      const auto r = interior_terms<Var>(m, cfg, nj.data(), t, x);
      first += first_weight(cfg, c) * r.first;
      cons += (cfg.correction.consistency ? c : 1.0) * r.consistency;
    } catch (const Error&) {
      rethrow_with(where("pde/objective", j, t, x));
    }
  }
  const JetMode ic_mode = mode_for(Part::Initial, cfg);
  for (std::size_t j = 0; j < batch.initial.size(); ++j) {
    const auto x = batch.initial.x(j);
    try {
      jets_at(0.0, x, ic_mode, nj);
      init += (cfg.correction.initial ? batch.initial.c[j] : 1.0) * initial_term<Var>(m, cfg, nj.data(), x);
    } catch (const Error&) {
      rethrow_with(where("initial", j, 0.0, x));
    }
  }
  const bool with_boundary = m.soft_bc() && batch.boundary.size() > 0;
  if (with_boundary) {
    for (std::size_t j = 0; j < batch.boundary.size(); ++j) {
      jets_at(batch.boundary.t(j), batch.boundary.x(j), JetMode::Value, nj);
      bnd += boundary_term<Var>(m, cfg, nj.data(), batch.boundary.t(j), batch.boundary.x(j));
    }
  }
  const double ni = static_cast<double>(batch.interior.size());
  first = first / ni;
  cons = cfg.kind == FormulationKind::QSigma ? cons / ni : Var(0.0);
  init = init / static_cast<double>(batch.initial.size());
  bnd = with_boundary ? bnd / static_cast<double>(batch.boundary.size()) : Var(0.0);
  const Var total = cfg.kappa * first + cfg.mu * bnd + cfg.nu * init + cfg.gamma * cons;

  LossEvaluation out;
  out.loss = {0.0, first.val, bnd.val, init.val, cons.val};
  finish(out.loss, cfg);
  if (!std::isfinite(out.loss.total)) throw NonFiniteError("reference loss is non-finite");
  out.grad.assign(params.size(), 0.0);
  if (!total.is_constant()) {
    tape.backward(total.idx);
    for (std::size_t i = 0; i < leaves.size(); ++i) out.grad[i] = tape.adjoint(leaves[i].idx);
  }
  return out;
}

// ---------------------------------------------------------------------------

LossBreakdown pinn_loss(const TrainingBatch& batch, const PinnEvaluator& u, const InitialCondition& u0,
                        const FormulationConfig& cfg, bool soft_bc) {
  cfg.validate();
  const Norm n = cfg.residual_norm();
  LossBreakdown l;
  double s = 0.0;
  for (std::size_t j = 0; j < batch.interior.size(); ++j) {
    const double t = batch.interior.t(j);
    const auto x = batch.interior.x(j);
    const double v = first_weight(cfg, batch.interior.c[j]) * pinn_pde_term(u.derivs(t, x), n);
    check_finite(v, "pde", j, t, x);
    s += v;
  }
  l.first = mean(s, batch.interior.size());
  s = 0.0;
  for (std::size_t j = 0; j < batch.initial.size(); ++j) {
    const auto x = batch.initial.x(j);
    const double v = (cfg.correction.initial ? batch.initial.c[j] : 1.0) * rho(u.value(0.0, x) - u0.value(x), n);
    check_finite(v, "initial", j, 0.0, x);
    s += v;
  }
  l.initial = mean(s, batch.initial.size());
  if (soft_bc) {
    s = 0.0;
    for (std::size_t j = 0; j < batch.boundary.size(); ++j) {
      const double v = rho(u.value(batch.boundary.t(j), batch.boundary.x(j)), n);
      check_finite(v, "boundary", j, batch.boundary.t(j), batch.boundary.x(j));
      s += v;
    }
    l.boundary = mean(s, batch.boundary.size());
  }
  finish(l, cfg);
  return l;
}

LossBreakdown phi_loss(const TrainingBatch& batch, const PhiEvaluator& phi, const InitialCondition& u0,
                       const FormulationConfig& cfg) {
  cfg.validate();
  LossBreakdown l;
  double s = 0.0;
  for (std::size_t j = 0; j < batch.interior.size(); ++j) {
    const double t = batch.interior.t(j);
    const auto x = batch.interior.x(j);
    try {
      const double v = batch.interior.c[j] * phi_objective_term(phi(t, x), u0.value(x), cfg.soft_guard);
      check_finite(v, "objective", j, t, x);
      s += v;
    } catch (const Error&) {
      rethrow_with(where("objective", j, t, x));
    }
  }
  l.first = mean(s, batch.interior.size());
  s = 0.0;
  for (std::size_t j = 0; j < batch.initial.size(); ++j) {
    const auto x = batch.initial.x(j);
    try {
      const double v = (cfg.correction.initial ? batch.initial.c[j] : 1.0) *
                       rho(phi_recovered_u(phi(0.0, x), cfg.soft_guard) - u0.value(x), cfg.residual_norm());
      check_finite(v, "initial", j, 0.0, x);
      s += v;
    } catch (const Error&) {
      rethrow_with(where("initial", j, 0.0, x));
    }
  }
  l.initial = mean(s, batch.initial.size());
  finish(l, cfg);
  return l;
}

LossBreakdown qsigma_loss(const TrainingBatch& batch, const QSigmaEvaluator& qs, const InitialCondition& u0,
                          const FormulationConfig& cfg) {
  cfg.validate();
  LossBreakdown l;
  double s = 0.0, sc = 0.0;
  for (std::size_t j = 0; j < batch.interior.size(); ++j) {
    const double t = batch.interior.t(j);
    const auto x = batch.interior.x(j);
    const QSigmaDerivs<double> r = qs.derivs(t, x);
    if (!(r.sigma > 0.0)) throw ConstraintViolationError("degenerate sigma" + where("objective", j, t, x));
    const double v = batch.interior.c[j] * qsigma_objective_term(r.q, r.sigma, u0.value(x));
    const double w = (cfg.correction.consistency ? batch.interior.c[j] : 1.0) *
                     qsigma_consistency_term(r.sigma_t, r.lap_q, cfg.consistency_norm);
    check_finite(v, "objective", j, t, x);
    check_finite(w, "consistency", j, t, x);
    s += v;
    sc += w;
  }
  l.first = mean(s, batch.interior.size());
  l.consistency = mean(sc, batch.interior.size());
  s = 0.0;
  for (std::size_t j = 0; j < batch.initial.size(); ++j) {
    const auto x = batch.initial.x(j);
    const QSigmaValues<double> v = qs.values(0.0, x);
    if (!(v.sigma > 0.0)) throw ConstraintViolationError("degenerate sigma" + where("initial", j, 0.0, x));
    const double e = (cfg.correction.initial ? batch.initial.c[j] : 1.0) * rho(v.q / v.sigma - u0.value(x), cfg.residual_norm());
    check_finite(e, "initial", j, 0.0, x);
    s += e;
  }
  l.initial = mean(s, batch.initial.size());
  finish(l, cfg);
  return l;
}

// ---------------------------------------------------------------------------

PinnEvaluator pinn_network(const Model& m, const ParamVector& params) {
  m.validate();
  if (!is_pinn(m.ansatz)) throw ContractError("pinn_network needs a PINN ansatz");
  const ParamVector p = m.net_param_vector(params, 0);
  return {
      [m, p](double t, std::span<const double> x) {
        return eval_u(m.ansatz, m.nets[0], p, t, x, m.domain.half_widths, m.u0);
      },
      [m, p](double t, std::span<const double> x) {
        std::vector<double> z{t};
        z.insert(z.end(), x.begin(), x.end());
        return pinn_value<double>(m.ansatz, mlp_forward(m.nets[0], p, z), t, f_dc(x, m.domain.half_widths),
                                  m.u0.value(x));
      }};
}

PhiEvaluator phi_network(const Model& m, const ParamVector& params) {
  m.validate();
  if (m.ansatz != AnsatzKind::PhiHardBc) throw ContractError("phi_network needs the phi ansatz");
  const ParamVector p = m.net_param_vector(params, 0);
  return [m, p](double t, std::span<const double> x) {
    return eval_phi(m.nets[0], p, t, x, m.domain.half_widths, m.domain.T);
  };
}

QSigmaEvaluator qsigma_network(const Model& m, const ParamVector& params) {
  m.validate();
  if (!is_qsigma(m.ansatz)) throw ContractError("qsigma_network needs a q-sigma ansatz");
  const ParamVector pq = m.net_param_vector(params, 0);
  const ParamVector ps = m.net_param_vector(params, 1);
  return {
      [m, pq, ps](double t, std::span<const double> x) {
        const auto nq = net_jets_generic<double, double>(m.nets[0], pq.view(), t, x);
        const auto ns = net_jets_generic<double, double>(m.nets[1], ps.view(), t, x);
        return qsigma_derivs(m.ansatz, nq, ns, t, m.domain.T, fdc_jets<double>(x, m.domain.half_widths));
      },
      [m, pq, ps](double t, std::span<const double> x) {
        std::vector<double> z{t};
        z.insert(z.end(), x.begin(), x.end());
        return qsigma_values<double>(m.ansatz, mlp_forward(m.nets[0], pq, z), mlp_forward(m.nets[1], ps, z), t,
                                     m.domain.T, f_dc(x, m.domain.half_widths), x.size());
      }};
}

// ---------------------------------------------------------------------------

L1Contraction l1_contraction_check(const PinnEvaluator& u_hat, const BarenblattSpec& exact, const DomainSpec& domain,
                                   double t, std::size_t n_mc, Rng& rng) {
  domain.validate();
  if (n_mc < 2) throw ContractError("l1_contraction_check needs at least 2 samples");
  if (!(t > 0.0) || t > domain.T) throw ContractError("evaluation time must lie in (0, T]");
  const double vol = std::exp(domain.log_volume());
  const double n = static_cast<double>(n_mc);
  struct Acc {
    double s = 0.0, s2 = 0.0;
    void add(double v) {
      s += v;
      s2 += v * v;
    }
    double mean(double n) const { return s / n; }
    double se(double n) const { return std::sqrt(std::max(s2 / n - (s / n) * (s / n), 0.0) / n); }
  };
  Acc lhs, ic, res;
  std::vector<double> x(domain.d);
  auto draw = [&] {
    for (std::size_t i = 0; i < domain.d; ++i) x[i] = rng.uniform(-domain.half_widths[i], domain.half_widths[i]);
  };
  for (std::size_t j = 0; j < n_mc; ++j) {
    draw();
    lhs.add(vol * std::fabs(barenblatt(exact, t, x) - u_hat.value(t, x)));
  }
  for (std::size_t j = 0; j < n_mc; ++j) {
    draw();
    ic.add(vol * std::fabs(barenblatt(exact, 0.0, x) - u_hat.value(0.0, x)));
  }
  for (std::size_t j = 0; j < n_mc; ++j) {
    const double s = rng.uniform(0.0, t);
    draw();
    res.add(t * vol * std::fabs(qpme_residual(u_hat.derivs(s, x))));
  }
  return {lhs.mean(n), ic.mean(n) + res.mean(n), lhs.se(n), std::hypot(ic.se(n), res.se(n))};
}

double exact_square_mean(const TrainingBatch& batch, const BarenblattSpec& exact) {
  double s = 0.0;
  for (std::size_t j = 0; j < batch.interior.size(); ++j) {
    const double u = barenblatt(exact, batch.interior.t(j), batch.interior.x(j));
    s += batch.interior.c[j] * u * u;
  }
  return mean(s, batch.interior.size());
}

}  // namespace qpme
