#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "qpme/errors.hpp"
#include "qpme/fdref.hpp"
#include "qpme/parallel.hpp"
#include "qpme/sampling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace qpme::cli {

namespace {

const std::map<std::string, std::string>& key_help() {
  static const std::map<std::string, std::string> h{
      {"problem", "barenblatt (shifted Barenblatt IBVP) or waiting (cosine data on [-4,4]^d)"},
      {"dim", "spatial dimension d"},
      {"formulation", "pinn-l2, pinn-l1, phi or qsigma"},
      {"ansatz", "network ansatz; defaults to the formulation's"},
      {"kappa", "weight of the PDE residual / variational objective"},
      {"mu", "weight of the soft boundary penalty"},
      {"nu", "weight of the initial-condition penalty"},
      {"gamma", "weight of the q-sigma consistency penalty"},
      {"correction_pde", "weight the PDE term by the sampling correction c(x)"},
      {"correction_initial", "weight the initial penalty by c(x)"},
      {"correction_consistency", "weight the consistency penalty by c(x)"},
      {"consistency_norm", "l1 or l2 norm of the consistency penalty"},
      {"soft_guard", "clamp 1 - lap(phi) at 1e-6 instead of stopping"},
      {"width", "hidden layer width"},
      {"depth", "number of hidden layers"},
      {"activation", "softplus or tanh"},
      {"half_width", "domain half width a; 0 picks ceil(r_T), or 4 for waiting"},
      {"T", "final time"},
      {"theta0", "mixture weight of the inner ball V0"},
      {"theta1", "mixture weight of the shell V1"},
      {"batch", "interior points per step"},
      {"boundary_batch", "boundary points per step for soft boundaries; 0 means batch"},
      {"steps", "Adam steps"},
      {"lr", "Adam learning rate"},
      {"seed", "seed of parameter init and batch stream"},
      {"eval_every", "slice-error cadence in steps; 0 only evaluates at the end"},
      {"eval_t", "time of the evaluation slice"},
      {"eval_c", "value of the frozen coordinates x_3..x_d on the slice"},
      {"eval_n", "nodes per axis of the evaluation slice"},
      {"clip_norm", "global gradient-norm clip; 0 is off"},
      {"output_dir", "directory for the run artifacts"},
      {"paper_table", "start from a published table preset: pinn, phi or qsigma"},
      {"checkpoint_every", "periodic checkpoint cadence in steps; 0 only writes the final one"},
  };
  return h;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // nlohmann reports line and column in the message.
    throw ContractError("config file '" + path + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

template <class F>
std::string to_text(F&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void require_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const json& flags, const std::string& resume, std::ostream& out,
              std::ostream& err) {
  const json file = config_path.empty() ? json::object() : read_json_file(config_path);
  const Experiment ex = resolve_experiment(file, flags);
  const TrainConfig& cfg = ex.config;
  const fs::path dir = ex.output_dir;
  require_dir(dir);

  TrainOptions opts;
  if (!resume.empty()) opts.resume = load_checkpoint(resume);
  opts.checkpoint_path = dir / "checkpoint.qckp";
  opts.checkpoint_every = ex.checkpoint_every;
  const std::size_t every = std::max<std::size_t>(1, cfg.steps / 10);
  opts.on_step = [&](const HistoryRow& r) {
    if (r.step % every == 0 || r.step == cfg.steps)
      err << "step " << r.step << "  loss " << fmt(r.loss.total) << '\n';
  };

  const TrainResult res = train(cfg, opts);

  write_text(dir / "history.csv", to_text([&](std::ostream& os) { write_history_csv(os, res.history); }));
  write_text(dir / "evals.csv", to_text([&](std::ostream& os) { write_eval_csv(os, res.evals); }));
  const auto gaps = entropy_gap(res.history);
  if (!gaps.empty()) {
    write_text(dir / "entropy_gap.csv", to_text([&](std::ostream& os) {
                 os << "step,gap\n" << std::setprecision(17);
                 for (const auto& g : gaps) os << g.step << ',' << g.gap << '\n';
               }));
  }
  save_checkpoint(opts.checkpoint_path, make_checkpoint(cfg, res.state));
  RunManifest man = res.manifest;
  man.checkpoint = opts.checkpoint_path.string();
  json mj = man.to_json();
  if (!ex.paper_table.empty()) mj["paper_table"] = ex.paper_table;
  write_text(dir / "manifest.json", mj.dump(2) + "\n");

  out << "status " << man.status;
  if (!man.message.empty()) out << " (" << man.message << ")";
  out << '\n';
  for (const auto& [k, v] : man.metrics) out << k << ' ' << fmt(v) << '\n';
  out << "artifacts in " << dir.string() << '\n';
  return res.ok() ? kOk : kFailed;
}

struct EvalArgs {
  std::string checkpoint;
  std::string out_dir = ".";
  double t = std::nan("");
  double c = std::nan("");
  std::size_t n = 0;
  bool oracle = false;
};

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  TrainConfig cfg = checkpoint_config(ck);
  if (!std::isnan(a.t)) cfg.eval_t = a.t;
  if (!std::isnan(a.c)) cfg.eval_c = a.c;
  if (a.n > 0) cfg.eval_n = a.n;
  cfg.validate();
  const fs::path dir = a.out_dir;
  require_dir(dir);

  const DomainSpec dom = cfg.domain();
  const auto exact = cfg.exact();
  if (a.oracle && !exact) throw ContractError("--oracle needs a problem with a closed-form solution");
  const Model model = cfg.model();
  const SliceEvaluator pred_fn = a.oracle ? exact_slice_evaluator(*exact) : model_slice_evaluator(model, ck.params);
  const SliceGrid pred = eval_slice(pred_fn, dom, cfg.eval_t, cfg.eval_c, cfg.eval_n);
  write_text(dir / "slice.csv", to_text([&](std::ostream& os) { write_slice_csv(os, pred); }));

  json report{{"checkpoint", a.checkpoint}, {"t", cfg.eval_t}, {"c", cfg.eval_c}, {"n", cfg.eval_n},
              {"nodes", pred.values.size()}, {"oracle", a.oracle}};
  out << "slice t=" << cfg.eval_t << " c=" << cfg.eval_c << " n=" << cfg.eval_n << " (" << pred.values.size()
      << " nodes)\n";
  if (exact) {
    const SliceGrid ref = eval_slice(exact_slice_evaluator(*exact), dom, cfg.eval_t, cfg.eval_c, cfg.eval_n);
    write_text(dir / "exact_slice.csv", to_text([&](std::ostream& os) { write_slice_csv(os, ref); }));
    const RelativeErrors e = relative_errors(pred, ref);
    report["relative_errors"] = {{"l1", e.l1}, {"l2", e.l2}, {"h1", e.h1}};
    out << "relative errors  L1 " << fmt(e.l1) << "  L2 " << fmt(e.l2) << "  H1 " << fmt(e.h1) << '\n';
  }
  const FormulationKind kind = cfg.formulation.kind;
  if (!a.oracle && (kind == FormulationKind::Phi || kind == FormulationKind::QSigma)) {
    Rng rng(0);
    PointBatch pts;
    const std::size_t m = 10000;
    pts.points.resize(static_cast<Eigen::Index>(cfg.dim + 1), static_cast<Eigen::Index>(m));
    pts.c.assign(m, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
      const WeightedSample s = sample_uniform(rng, dom);
      pts.points(0, static_cast<Eigen::Index>(j)) = s.t;
      for (std::size_t i = 0; i < cfg.dim; ++i)
        pts.points(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(j)) = s.x[i];
    }
    const ConstraintReport r = kind == FormulationKind::Phi ? constraint_audit(phi_network(model, ck.params), pts, dom.T)
                                                            : constraint_audit(qsigma_network(model, ck.params), pts, dom.T);
    report["constraint_audit"] = {{"samples", r.samples},
                                  {"denominator_violation", r.denominator_violation},
                                  {"negative_u", r.negative_u},
                                  {"sigma_violation", r.sigma_violation},
                                  {"min_denominator", r.min_denominator}};
    out << "constraint audit over " << r.samples << " points: denominator " << fmt(r.denominator_violation)
        << ", negative u " << fmt(r.negative_u) << ", sigma " << fmt(r.sigma_violation) << '\n';
  }
  write_text(dir / "errors.json", report.dump(2) + "\n");
  return kOk;
}

struct SampleArgs {
  std::string problem = "barenblatt";
  std::size_t dim = 1;
  double theta0 = 0.3;
  double theta1 = 0.3;
  double half_width = 0.0;
  double T = 1.0;
  std::size_t n = 100000;
  std::uint64_t seed = 0;
  std::string dump;
};

int cmd_sample_check(const SampleArgs& a, std::ostream& out) {
  if (a.n < 1000) throw ContractError("sample-check needs --n >= 1000");
  TrainConfig cfg;
  cfg.problem = problem_from_string(a.problem);
  cfg.dim = a.dim;
  cfg.theta0 = a.theta0;
  cfg.theta1 = a.theta1;
  cfg.half_width = a.half_width;
  cfg.T = a.T;
  const MixtureSampler sampler(cfg.mixture(), cfg.T);
  sampler.spec().validate();
  Rng rng(a.seed);
  std::vector<WeightedSample> dump;
  const SamplerCheck r = sampler_check(sampler, rng, a.n, a.dump.empty() ? nullptr : &dump);

  const auto vols = sampler.log_volumes();
  out << "d=" << a.dim << " a=" << cfg.domain().half_widths[0] << " r0=" << sampler.spec().r0
      << " rT=" << sampler.spec().rT << " n=" << r.n << '\n';
  out << "log volume fractions  V0 " << fmt(vols.v0 - vols.omega) << "  V1 " << fmt(vols.v1 - vols.omega) << "  V2 "
      << fmt(vols.v2 - vols.omega) << '\n';
  out << "region  count  frequency  expected  z  correction\n";
  for (int i = 0; i < 3; ++i) {
    out << to_string(static_cast<Region>(i)) << "  " << r.counts[i] << "  "
        << fmt(static_cast<double>(r.counts[i]) / static_cast<double>(r.n)) << "  " << fmt(r.expected[i]) << "  "
        << fmt(r.z[i]) << "  " << fmt(sampler.corrections()[i]) << '\n';
  }
  out << "mean c " << fmt(r.mean_c) << " +- " << fmt(r.se_c) << " (unbiased: 1)\n";
  if (r.ks_samples >= 2)
    out << "KS of (|x|/r0)^d over " << r.ks_samples << " V0 draws " << fmt(r.ks_v0) << " (1% critical "
        << fmt(1.628 / std::sqrt(static_cast<double>(r.ks_samples))) << ")\n";
  else
    out << "KS skipped: fewer than 2 draws in V0\n";
  if (!a.dump.empty()) {
    write_text(a.dump, to_text([&](std::ostream& os) { write_samples_csv(os, dump); }));
    out << "samples written to " << a.dump << '\n';
  }
  return kOk;
}

struct FdArgs {
  std::string mode = "waiting";
  double h = 0.04;
  std::string dt = "auto";
  double eps = kSupportThreshold;
  std::size_t dim = 2;
  double t_end = 0.5;
  std::size_t levels = 1;
  std::string out_dir = "fdref";
};

double parse_dt(const std::string& s) {
  if (s == "auto") return 0.0;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || !(v > 0.0)) throw ContractError("--dt expects 'auto' or a positive number, got '" + s + "'");
  return v;
}

int cmd_fdref(const FdArgs& a, std::ostream& out) {
  const double dt = parse_dt(a.dt);
  const fs::path dir = a.out_dir;
  require_dir(dir);
  if (a.mode == "waiting") {
    const WaitingRun w = waiting_time_experiment(a.h, dt, a.eps, a.dim);
    for (const Snapshot& s : w.snapshots) {
      char name[32];
      std::snprintf(name, sizeof name, "snapshot_t%.2f.csv", s.t);
      write_text(dir / name, to_text([&](std::ostream& os) { write_snapshot_csv(os, s); }));
    }
    write_text(dir / "radius.csv", to_text([&](std::ostream& os) {
                 os << "t,radius\n" << std::setprecision(17);
                 for (const auto& p : w.radius) os << p.t << ',' << p.radius << '\n';
               }));
    auto radius_at = [&](double t) {
      for (const auto& p : w.radius)
        if (std::fabs(p.t - t) < 1e-9) return p.radius;
      return std::nan("");
    };
    const double r0 = w.radius.front().radius;
    const json report{{"h", a.h},
                      {"dim", a.dim},
                      {"eps", a.eps},
                      {"radius_t0", r0},
                      {"radius_t0.1", radius_at(0.1)},
                      {"radius_t1", radius_at(1.0)},
                      {"probe_t0", {{"flux_gradient", w.probe_t0.flux_gradient},
                                    {"front_speed", w.probe_t0.front_speed},
                                    {"radius", w.probe_t0.radius}}},
                      {"mass_t0", w.mass_t0},
                      {"mass_t1", w.mass_t1}};
    write_text(dir / "report.json", report.dump(2) + "\n");
    out << "free boundary  t=0 " << fmt(r0) << "  t=0.1 " << fmt(radius_at(0.1)) << "  t=1 " << fmt(radius_at(1.0))
        << '\n';
    out << "displacement  t=0.1 " << fmt(radius_at(0.1) - r0) << " (" << fmt((radius_at(0.1) - r0) / a.h)
        << " h)  t=1 " << fmt(radius_at(1.0) - r0) << '\n';
    out << "Darcy probe at t=0  grad(u^2/2) " << fmt(w.probe_t0.flux_gradient) << "  front speed "
        << fmt(w.probe_t0.front_speed) << '\n';
    out << "mass  t=0 " << fmt(w.mass_t0) << "  t=1 " << fmt(w.mass_t1) << '\n';
    out << w.snapshots.size() << " snapshots in " << dir.string() << '\n';
    return kOk;
  }
  if (a.mode == "barenblatt") {
    if (a.levels < 1) throw ContractError("--levels must be >= 1");
    json rows = json::array();
    out << "h  dt  steps  max_error  ratio  mass_drift\n";
    double prev = std::nan("");
    double h = a.h;
    for (std::size_t l = 0; l < a.levels; ++l, h *= 0.5) {
      const BarenblattFdResult r = barenblatt_fd_validation(h, a.t_end, dt);
      const double ratio = prev / r.max_error;
      out << fmt(r.h) << "  " << fmt(r.dt) << "  " << r.steps << "  " << fmt(r.max_error) << "  "
          << (std::isnan(ratio) ? std::string("-") : fmt(ratio)) << "  " << fmt(r.mass_end - r.mass_start) << '\n';
      rows.push_back({{"h", r.h}, {"dt", r.dt}, {"steps", r.steps}, {"max_error", r.max_error},
                      {"mass_start", r.mass_start}, {"mass_end", r.mass_end}});
      prev = r.max_error;
    }
    write_text(dir / "barenblatt.json", json{{"t_end", a.t_end}, {"levels", rows}}.dump(2) + "\n");
    return kOk;
  }
  throw ContractError("unknown --mode '" + a.mode + "' (expected waiting or barenblatt)");
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> experiment_keys() {
  std::vector<std::string> keys = train_config_keys();
  keys.insert(keys.end(), {"output_dir", "paper_table", "checkpoint_every"});
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

std::string key_from_flag(const std::string& flag) {
  std::string k = flag.rfind("--", 0) == 0 ? flag.substr(2) : flag;
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

const json& experiment_defaults() {
  static const json d = [] {
    json j = to_json(TrainConfig{});
    const Experiment e;
    j["output_dir"] = e.output_dir;
    j["paper_table"] = e.paper_table;
    j["checkpoint_every"] = e.checkpoint_every;
    return j;
  }();
  return d;
}

json parse_flag_value(const std::string& key, const std::string& text) {
  const json& defaults = experiment_defaults();
  if (!defaults.contains(key)) throw ContractError("unknown config key '" + key + "'");
  const json& def = defaults.at(key);
  auto bad = [&](const char* what) {
    return ContractError(flag_name(key) + " expects " + what + ", got '" + text + "'");
  };
  if (def.is_string()) return text;
  if (def.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw bad("true or false");
  }
  std::size_t pos = 0;
  try {
    if (def.is_number_unsigned() || def.is_number_integer()) {
      if (!text.empty() && text[0] == '-') throw bad("a nonnegative integer");
      const unsigned long long v = std::stoull(text, &pos);
      if (pos != text.size()) throw bad("a nonnegative integer");
      return v;
    }
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw bad("a number");
    return v;
  } catch (const ContractError&) {
    throw;
  } catch (const std::exception&) {
    throw bad(def.is_number_float() ? "a number" : "a nonnegative integer");
  }
}

Experiment resolve_experiment(const json& file, const json& flags) {
  if (!file.is_object()) throw ContractError("config file must hold a JSON object");
  json merged = file;
  merged.update(flags);
  const json& defaults = experiment_defaults();
  for (const auto& [key, v] : merged.items()) {
    if (!defaults.contains(key)) throw ContractError("unknown config key '" + key + "'");
  }

  Experiment ex;
  try {
    if (merged.contains("output_dir")) ex.output_dir = merged.at("output_dir").get<std::string>();
    if (merged.contains("paper_table")) ex.paper_table = merged.at("paper_table").get<std::string>();
    if (merged.contains("checkpoint_every")) ex.checkpoint_every = merged.at("checkpoint_every").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  for (const char* k : {"output_dir", "paper_table", "checkpoint_every"}) merged.erase(k);

  json base;
  if (ex.paper_table.empty()) {
    base = to_json(TrainConfig{});
  } else {
    std::size_t dim = 1;
    if (merged.contains("dim")) dim = train_config_from_json(json{{"dim", merged.at("dim")}}).dim;
    base = to_json(table_preset(ex.paper_table, dim));
  }
  if (merged.contains("formulation") && !merged.contains("ansatz")) base.erase("ansatz");
  base.update(merged);
  ex.config = train_config_from_json(base);
  ex.config.validate();
  return ex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_threads();
  CLI::App app{"Neural and finite-difference solvers for the quadratic porous medium equation", "qpme"};
  app.require_subcommand(1);
  app.footer("Environment: QPME_THREADS sets the worker count (0 or unset: OpenMP default).\n"
             "Exit codes: 0 ok, 1 training failed or diverged, 2 usage, 3 I/O.");

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "train one network model and write its artifacts");
  std::string config_path, resume;
  train_cmd->add_option("--config", config_path, "JSON experiment file; flags override its keys");
  train_cmd->add_option("--resume", resume, "continue from a checkpoint written by an earlier run");
  std::map<std::string, std::string> flag_text;
  std::map<std::string, CLI::Option*> flag_opts;
  for (const std::string& key : experiment_keys()) {
    const json& def = experiment_defaults().at(key);
    const std::string shown = def.is_string() ? def.get<std::string>() : def.dump();
    const char* type = def.is_string() ? "TEXT" : def.is_boolean() ? "BOOL" : def.is_number_float() ? "FLOAT" : "UINT";
    flag_opts[key] =
        train_cmd->add_option(flag_name(key), flag_text[key], key_help().at(key))->default_str(shown)->type_name(type);
  }

  // evaluate
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "slice a checkpoint and report relative errors");
  EvalArgs ea;
  eval_cmd->add_option("checkpoint", ea.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--t", ea.t, "slice time (default: the run's eval_t)");
  eval_cmd->add_option("--c", ea.c, "frozen coordinates x_3..x_d (default: the run's eval_c)");
  eval_cmd->add_option("--n", ea.n, "nodes per axis (default: the run's eval_n)");
  eval_cmd->add_option("--output-dir", ea.out_dir, "directory for slice.csv and errors.json")->capture_default_str();
  eval_cmd->add_flag("--oracle", ea.oracle, "slice the closed-form solution instead of the network");

  // sample-check
  CLI::App* samp_cmd = app.add_subcommand("sample-check", "statistics of the mixture sampler");
  SampleArgs sa;
  samp_cmd->add_option("--problem", sa.problem, "barenblatt or waiting")->capture_default_str();
  samp_cmd->add_option("--dim", sa.dim, "spatial dimension")->capture_default_str();
  samp_cmd->add_option("--theta0", sa.theta0, "weight of V0")->capture_default_str();
  samp_cmd->add_option("--theta1", sa.theta1, "weight of V1")->capture_default_str();
  samp_cmd->add_option("--half-width", sa.half_width, "domain half width; 0 is automatic")->capture_default_str();
  samp_cmd->add_option("--T", sa.T, "final time")->capture_default_str();
  samp_cmd->add_option("--n", sa.n, "number of draws (>= 1000)")->capture_default_str();
  samp_cmd->add_option("--seed", sa.seed, "generator seed")->capture_default_str();
  samp_cmd->add_option("--dump", sa.dump, "write the draws as CSV t,x_1..x_d,region,c");

  // fdref
  CLI::App* fd_cmd = app.add_subcommand("fdref", "explicit finite-difference reference runs");
  FdArgs fa;
  fd_cmd->set_help_flag("--help", "Print this help message and exit");
  fd_cmd->add_option("--mode", fa.mode, "waiting (cosine data) or barenblatt (1D validation)")->capture_default_str();
  fd_cmd->add_option("--h", fa.h, "mesh width")->capture_default_str();
  fd_cmd->add_option("--dt", fa.dt, "time step, or auto for 0.9 of the stability bound")->capture_default_str();
  fd_cmd->add_option("--eps", fa.eps, "support threshold of the free boundary")->capture_default_str();
  fd_cmd->add_option("--dim", fa.dim, "1 or 2 (waiting mode)")->capture_default_str();
  fd_cmd->add_option("--t-end", fa.t_end, "final time (barenblatt mode)")->capture_default_str();
  fd_cmd->add_option("--levels", fa.levels, "mesh halvings to run (barenblatt mode)")->capture_default_str();
  fd_cmd->add_option("--output-dir", fa.out_dir, "directory for CSV and JSON output")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    // help() delegates to the subcommand that was named, if any.
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == train_cmd) {
      json flags = json::object();
      for (const auto& [key, opt] : flag_opts)
        if (opt->count() > 0) flags[key] = parse_flag_value(key, flag_text.at(key));
      return cmd_train(config_path, flags, resume, out, err);
    }
    if (active == eval_cmd) return cmd_evaluate(ea, out);
    if (active == samp_cmd) return cmd_sample_check(sa, out);
    return cmd_fdref(fa, out);
  } catch (const StabilityError& e) {
    err << "error: " << e.what() << " (suggested dt " << e.suggested_dt() << ")\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailed;
  }
}

}  // namespace qpme::cli
