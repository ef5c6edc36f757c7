#include "qpme/training.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <ostream>
#include <set>

#include "qpme/errors.hpp"

#ifndef QPME_SOURCE_ID
#define QPME_SOURCE_ID "unknown"
#endif

namespace qpme {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  const std::size_t n = params.size();
  if (grads.size() != n || s.m.size() != n || s.v.size() != n)
    throw ContractError("adam_step: params, grads and moments must have equal length");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(grads[i]))
      throw NonFiniteError("non-finite gradient " + std::to_string(grads[i]) + " at parameter " + std::to_string(i));
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    params[i] -= s.lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
  }
}

std::string to_string(Problem p) { return p == Problem::Waiting ? "waiting" : "barenblatt"; }

Problem problem_from_string(const std::string& name) {
  if (name == "barenblatt") return Problem::Barenblatt;
  if (name == "waiting") return Problem::Waiting;
  throw ContractError("unknown problem '" + name + "' (barenblatt, waiting)");
}

AnsatzKind default_ansatz(FormulationKind k) {
  switch (k) {
    case FormulationKind::Phi:
      return AnsatzKind::PhiHardBc;
    case FormulationKind::QSigma:
      return AnsatzKind::QSigma;
    default:
      return AnsatzKind::PinnSoftIcHardBc;
  }
}

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ContractError("config: " + what);
  };
  require(dim >= 1, "dim must be >= 1");
  require(width >= 1 && depth >= 1, "width and depth must be >= 1");
  require(batch >= 1, "batch must be >= 1");
  require(steps >= 1, "steps must be >= 1");
  require(std::isfinite(lr) && lr > 0.0, "lr must be positive");
  require(std::isfinite(T) && T > 0.0, "T must be positive");
  require(std::isfinite(half_width) && half_width >= 0.0, "half_width must be >= 0");
  require(theta0 >= 0.0 && theta1 >= 0.0 && theta0 + theta1 <= 1.0, "theta0, theta1 >= 0 with theta0 + theta1 <= 1");
  require(eval_n >= 1, "eval_n must be >= 1");
  require(eval_t >= 0.0 && eval_t <= T, "eval_t must lie in [0, T]");
  require(std::isfinite(clip_norm) && clip_norm >= 0.0, "clip_norm must be >= 0");
  formulation.validate();
  const Model m = model();
  m.validate();
  m.check_compatible(formulation);
  mixture().validate();
}

DomainSpec TrainConfig::domain() const {
  double a = half_width;
  if (a == 0.0) a = problem == Problem::Waiting ? 4.0 : static_cast<double>(domain_halfwidth(dim));
  return DomainSpec::cube(dim, a, T);
}

InitialCondition TrainConfig::initial_condition() const {
  return problem == Problem::Waiting ? InitialCondition::waiting(dim) : InitialCondition::barenblatt(dim);
}

MixtureSpec TrainConfig::mixture() const {
  const DomainSpec dom = domain();
  return problem == Problem::Waiting ? MixtureSpec::waiting(dim, dom.half_widths, theta0, theta1)
                                     : MixtureSpec::barenblatt(dim, dom.half_widths, theta0, theta1);
}

Model TrainConfig::model() const {
  MlpSpec s;
  s.input_dim = dim + 1;
  s.hidden_widths.assign(depth, width);
  s.activation = activation;
  return Model{ansatz, std::vector<MlpSpec>(network_count(ansatz), s), domain(), initial_condition()};
}

std::optional<BarenblattSpec> TrainConfig::exact() const {
  if (problem == Problem::Barenblatt) return BarenblattSpec::shifted(dim);
  return std::nullopt;
}

std::size_t TrainConfig::boundary_batch_size() const {
  if (has_hard_bc(ansatz)) return 0;
  return boundary_batch == 0 ? batch : boundary_batch;
}

bool TrainConfig::operator==(const TrainConfig& o) const { return to_json(*this) == to_json(o); }

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const TrainConfig& c) {
  const FormulationConfig& f = c.formulation;
  return nlohmann::json{
      {"problem", to_string(c.problem)},
      {"dim", c.dim},
      {"formulation", to_string(f.kind)},
      {"ansatz", to_string(c.ansatz)},
      {"kappa", f.kappa},
      {"mu", f.mu},
      {"nu", f.nu},
      {"gamma", f.gamma},
      {"correction_pde", f.correction.pde},
      {"correction_initial", f.correction.initial},
      {"correction_consistency", f.correction.consistency},
      {"consistency_norm", to_string(f.consistency_norm)},
      {"soft_guard", f.soft_guard},
      {"width", c.width},
      {"depth", c.depth},
      {"activation", to_string(c.activation)},
      {"half_width", c.half_width},
      {"T", c.T},
      {"theta0", c.theta0},
      {"theta1", c.theta1},
      {"batch", c.batch},
      {"boundary_batch", c.boundary_batch},
      {"steps", c.steps},
      {"lr", c.lr},
      {"seed", c.seed},
      {"eval_every", c.eval_every},
      {"eval_t", c.eval_t},
      {"eval_c", c.eval_c},
      {"eval_n", c.eval_n},
      {"clip_norm", c.clip_norm},
  };
}

std::vector<std::string> train_config_keys() {
  std::vector<std::string> keys;
  const nlohmann::json j = to_json(TrainConfig{});
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  return keys;
}

namespace {

template <class T>
T get_as(const nlohmann::json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ContractError("expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ContractError("expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ContractError("expected a string");
    } else {
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        throw ContractError("expected a non-negative integer");
    }
    return j.get<T>();
  } catch (const std::exception& e) {
    throw ContractError("config key '" + key + "': " + e.what());
  }
}

template <class F>
auto with_key(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ContractError& e) {
    throw ContractError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("config must be a JSON object");
  TrainConfig c;
  FormulationConfig& f = c.formulation;
  bool ansatz_given = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "problem") c.problem = with_key(key, [&] { return problem_from_string(get_as<std::string>(v, key)); });
    else if (key == "dim") c.dim = get_as<std::size_t>(v, key);
    else if (key == "formulation") f.kind = with_key(key, [&] { return formulation_from_string(get_as<std::string>(v, key)); });
    else if (key == "ansatz") {
      c.ansatz = with_key(key, [&] { return ansatz_from_string(get_as<std::string>(v, key)); });
      ansatz_given = true;
    }
    else if (key == "kappa") f.kappa = get_as<double>(v, key);
    else if (key == "mu") f.mu = get_as<double>(v, key);
    else if (key == "nu") f.nu = get_as<double>(v, key);
    else if (key == "gamma") f.gamma = get_as<double>(v, key);
    else if (key == "correction_pde") f.correction.pde = get_as<bool>(v, key);
    else if (key == "correction_initial") f.correction.initial = get_as<bool>(v, key);
    else if (key == "correction_consistency") f.correction.consistency = get_as<bool>(v, key);
    else if (key == "consistency_norm") f.consistency_norm = with_key(key, [&] { return norm_from_string(get_as<std::string>(v, key)); });
    else if (key == "soft_guard") f.soft_guard = get_as<bool>(v, key);
    else if (key == "width") c.width = get_as<std::size_t>(v, key);
    else if (key == "depth") c.depth = get_as<std::size_t>(v, key);
    else if (key == "activation") c.activation = with_key(key, [&] { return activation_from_string(get_as<std::string>(v, key)); });
    else if (key == "half_width") c.half_width = get_as<double>(v, key);
    else if (key == "T") c.T = get_as<double>(v, key);
    else if (key == "theta0") c.theta0 = get_as<double>(v, key);
    else if (key == "theta1") c.theta1 = get_as<double>(v, key);
    else if (key == "batch") c.batch = get_as<std::size_t>(v, key);
    else if (key == "boundary_batch") c.boundary_batch = get_as<std::size_t>(v, key);
    else if (key == "steps") c.steps = get_as<std::size_t>(v, key);
    else if (key == "lr") c.lr = get_as<double>(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "eval_every") c.eval_every = get_as<std::size_t>(v, key);
    else if (key == "eval_t") c.eval_t = get_as<double>(v, key);
    else if (key == "eval_c") c.eval_c = get_as<double>(v, key);
    else if (key == "eval_n") c.eval_n = get_as<std::size_t>(v, key);
    else if (key == "clip_norm") c.clip_norm = get_as<double>(v, key);
    else throw ContractError("unknown config key '" + key + "'");
  }
  if (!ansatz_given) c.ansatz = default_ansatz(f.kind);
  return c;
}

// ---------------------------------------------------------------------------
// Presets

TrainConfig table_preset(const std::string& table, std::size_t d) {
  TrainConfig c;
  c.dim = d;
  c.lr = 1e-3;
  c.steps = 100000;
  c.theta0 = 0.3;
  c.theta1 = 0.3;
  c.width = d >= 20 ? 400 : 200;
  c.depth = 2;
  FormulationConfig& f = c.formulation;
  const std::set<std::size_t> wide{1, 2, 3, 4, 5, 10, 15, 20, 50};
  if (table == "pinn") {
    if (!wide.contains(d)) throw ContractError("the pinn table has no column for d = " + std::to_string(d));
    f.kind = FormulationKind::PinnL2;
    f.nu = d <= 5 ? 1e3 : 1.0;
    f.kappa = d <= 5 ? 1.0 : 1e3;
    if (d >= 20) {
      c.theta1 = 0.2;
      c.steps = 200000;
    }
  } else if (table == "phi") {
    if (!wide.contains(d)) throw ContractError("the phi table has no column for d = " + std::to_string(d));
    f.kind = FormulationKind::Phi;
    f.nu = d <= 4 ? 1e3 : 1.0;
    f.kappa = d <= 4 ? 1.0 : d == 15 ? 1e4 : d == 20 ? 1e5 : 1e3;
    if (d == 20) {
      c.theta0 = 0.2;
      c.steps = 600000;
    } else if (d == 50) {
      c.theta0 = 0.4;
      c.theta1 = 0.4;
      c.steps = 200000;
      c.lr = 1e-4;
    }
  } else if (table == "qsigma") {
    const std::set<std::size_t> dims{1, 2, 3, 4, 5, 10};
    if (!dims.contains(d)) throw ContractError("the qsigma table has no column for d = " + std::to_string(d));
    f.kind = FormulationKind::QSigma;
    f.nu = 1.0;
    f.kappa = 1e3;
    f.gamma = d <= 5 ? 1e3 : 1.0;
  } else {
    throw ContractError("unknown table '" + table + "' (pinn, phi, qsigma)");
  }
  c.ansatz = default_ansatz(f.kind);
  return c;
}

// ---------------------------------------------------------------------------
// History

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& h) {
  os << "step,total,objective,boundary,initial,consistency\n";
  os.precision(17);
  for (const auto& r : h)
    os << r.step << ',' << r.loss.total << ',' << r.loss.first << ',' << r.loss.boundary << ',' << r.loss.initial << ','
       << r.loss.consistency << '\n';
}

void write_eval_csv(std::ostream& os, const std::vector<EvalRow>& e) {
  os << "step,l1,l2,h1\n";
  os.precision(17);
  for (const auto& r : e) os << r.step << ',' << r.errors.l1 << ',' << r.errors.l2 << ',' << r.errors.h1 << '\n';
}

std::vector<GapPoint> entropy_gap(const std::vector<HistoryRow>& h) {
  std::vector<GapPoint> out;
  for (const auto& r : h)
    if (!std::isnan(r.entropy_gap)) out.push_back({r.step, r.entropy_gap});
  return out;
}

GapTrend gap_trend(const std::vector<GapPoint>& gaps, std::size_t window) {
  if (gaps.empty() || window == 0) throw ContractError("gap_trend needs a non-empty series and window");
  const std::size_t w = std::min(window, gaps.size());
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    a += gaps[i].gap;
    b += gaps[gaps.size() - w + i].gap;
  }
  return {std::fabs(a / static_cast<double>(w)), std::fabs(b / static_cast<double>(w))};
}

// ---------------------------------------------------------------------------
// Manifest

nlohmann::json RunManifest::to_json() const {
  return nlohmann::json{{"status", status},   {"message", message},   {"config", config},
                        {"source_id", source_id}, {"started", started}, {"finished", finished},
                        {"steps_completed", steps_completed}, {"threads", threads}, {"metrics", metrics},
                        {"checkpoint", checkpoint}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.status = j.at("status").get<std::string>();
    m.message = j.at("message").get<std::string>();
    m.config = j.at("config");
    m.source_id = j.at("source_id").get<std::string>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.steps_completed = j.at("steps_completed").get<std::uint64_t>();
    m.threads = j.at("threads").get<int>();
    m.metrics = j.at("metrics").get<std::map<std::string, double>>();
    m.checkpoint = j.at("checkpoint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

std::string source_id() { return QPME_SOURCE_ID; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Training

Checkpoint make_checkpoint(const TrainConfig& config, const TrainState& state) {
  Checkpoint c;
  c.nets = config.model().nets;
  c.seed = config.seed;
  c.step = state.adam.step;
  c.meta = nlohmann::json{{"config", to_json(config)}}.dump();
  c.params = state.params;
  c.optimizer = OptimizerSnapshot{state.adam, state.rng.state()};
  return c;
}

TrainConfig checkpoint_config(const Checkpoint& ckpt) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.meta);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  if (!meta.contains("config")) throw IoError("checkpoint metadata has no config");
  TrainConfig c = train_config_from_json(meta.at("config"));
  if (c.model().nets != ckpt.nets) throw IoError("checkpoint networks do not match its stored config");
  return c;
}

RelativeErrors slice_errors(const TrainConfig& config, const ParamVector& params) {
  const auto exact = config.exact();
  if (!exact) throw ContractError("slice errors need a closed-form reference (barenblatt problem)");
  const DomainSpec dom = config.domain();
  const SliceGrid ref = eval_slice(exact_slice_evaluator(*exact), dom, config.eval_t, config.eval_c, config.eval_n);
  const SliceGrid pred =
      eval_slice(model_slice_evaluator(config.model(), params), dom, config.eval_t, config.eval_c, config.eval_n);
  return relative_errors(pred, ref);
}

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  const Model model = config.model();
  const DomainSpec dom = model.domain;
  const MixtureSampler sampler(config.mixture(), dom.T);
  const auto exact = config.exact();
  const bool gap_on = exact && (config.formulation.kind == FormulationKind::Phi ||
                                config.formulation.kind == FormulationKind::QSigma);
  const std::size_t nb = config.boundary_batch_size();

  TrainResult res;
  RunManifest& man = res.manifest;
  man.config = to_json(config);
  man.source_id = source_id();
  man.started = utc_timestamp();
  man.threads = omp_get_max_threads();
  man.checkpoint = options.checkpoint_path.string();

  TrainState& st = res.state;
  if (options.resume) {
    const Checkpoint& ck = *options.resume;
    if (ck.nets != model.nets) throw ContractError("resume checkpoint networks do not match the config");
    if (!ck.optimizer) throw ContractError("resume checkpoint carries no optimizer state");
    if (ck.seed != config.seed) throw ContractError("resume checkpoint was trained with another seed");
    if (ck.step > config.steps) throw ContractError("resume checkpoint is already past the requested steps");
    st.params = ck.params;
    st.adam = ck.optimizer->adam;
    st.adam.lr = config.lr;
    st.rng.set_state(ck.optimizer->rng_state);
  } else {
    st.rng = Rng(config.seed, 0);
    st.params = init_model_params(model, st.rng);
    st.adam = AdamState::fresh(st.params.size(), config.lr);
  }

  auto fail = [&](const std::string& msg) {
    man.status = "failed";
    man.message = msg;
  };

  std::vector<double> grad;
  while (st.adam.step < config.steps) {
    const std::uint64_t step = st.adam.step + 1;
    try {
      const TrainingBatch batch = draw_batch(st.rng, sampler, dom, config.batch, nb);
      LossEvaluation ev = evaluate_loss(model, config.formulation, st.params, batch, true);
      if (!std::isfinite(ev.loss.total)) throw NonFiniteError("loss diverged: total = " + std::to_string(ev.loss.total));
      HistoryRow row{step, ev.loss, std::numeric_limits<double>::quiet_NaN()};
      if (gap_on) row.entropy_gap = ev.loss.first + exact_square_mean(batch, *exact);
      if (config.clip_norm > 0.0) {
        double sq = 0.0;
        for (double g : ev.grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > config.clip_norm)
          for (double& g : ev.grad) g *= config.clip_norm / norm;
      }
      adam_step(st.params.view(), ev.grad, st.adam);
      res.history.push_back(row);
      if (options.on_step) options.on_step(row);
    } catch (const ConstraintViolationError& e) {
      fail("step " + std::to_string(step) + ": constraint violation: " + e.what());
      break;
    } catch (const SingularDenominatorError& e) {
      fail("step " + std::to_string(step) + ": " + e.what());
      break;
    } catch (const NonFiniteError& e) {
      fail("step " + std::to_string(step) + ": diverged: " + e.what());
      break;
    }
    if (exact && config.eval_every > 0 && (step % config.eval_every == 0 || step == config.steps))
      res.evals.push_back({step, slice_errors(config, st.params)});
    if (!options.checkpoint_path.empty() && options.checkpoint_every > 0 && step % options.checkpoint_every == 0)
      save_checkpoint(options.checkpoint_path, make_checkpoint(config, st));
  }

  man.steps_completed = st.adam.step;
  man.finished = utc_timestamp();
  if (man.status == "failed") return res;
  man.status = "ok";
  if (!res.history.empty()) {
    man.metrics["loss_total"] = res.history.back().loss.total;
    man.metrics["loss_objective"] = res.history.back().loss.first;
  }
  if (exact) {
    const RelativeErrors e = res.evals.empty() || res.evals.back().step != st.adam.step ? slice_errors(config, st.params)
                                                                                        : res.evals.back().errors;
    man.metrics["rel_l1"] = e.l1;
    man.metrics["rel_l2"] = e.l2;
    man.metrics["rel_h1"] = e.h1;
  }
  if (gap_on && !res.history.empty()) {
    const GapTrend g = gap_trend(entropy_gap(res.history));
    man.metrics["gap_initial"] = g.initial;
    man.metrics["gap_final"] = g.final;
  }
  return res;
}

}  // namespace qpme
