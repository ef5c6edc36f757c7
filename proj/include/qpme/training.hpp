#pragma once

// Training loop: fresh mixture batches every step, the configured loss and its
// joint parameter gradient, Adam, periodic slice evaluation, checkpoints and a
// run manifest.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpme/checkpoint.hpp"
#include "qpme/formulations.hpp"
#include "qpme/metrics.hpp"

namespace qpme {

/// Bias-corrected Adam update in place. Non-finite gradients are rejected
/// before anything is modified.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

enum class Problem { Barenblatt, Waiting };
std::string to_string(Problem p);
Problem problem_from_string(const std::string& name);

AnsatzKind default_ansatz(FormulationKind k);

struct TrainConfig {
  Problem problem = Problem::Barenblatt;
  std::size_t dim = 1;
  AnsatzKind ansatz = AnsatzKind::PinnSoftIcHardBc;
  FormulationConfig formulation;
  std::size_t width = 200;
  std::size_t depth = 2;
  Activation activation = Activation::Softplus;
  double half_width = 0.0;  // 0: ceil(r_T) for Barenblatt, 4 for the waiting problem
  double T = 1.0;
  double theta0 = 0.3;
  double theta1 = 0.3;
  std::size_t batch = 1000;
  std::size_t boundary_batch = 0;  // soft boundary only; 0 means `batch`
  std::size_t steps = 1000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t eval_every = 500;  // 0 disables periodic slice errors
  double eval_t = 0.5;
  double eval_c = 1.0;
  std::size_t eval_n = 100;
  double clip_norm = 0.0;  // global-norm clip; 0 is off

  void validate() const;
  DomainSpec domain() const;
  InitialCondition initial_condition() const;
  MixtureSpec mixture() const;
  Model model() const;
  /// Closed-form reference, when the problem has one.
  std::optional<BarenblattSpec> exact() const;
  std::size_t boundary_batch_size() const;

  bool operator==(const TrainConfig&) const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys and bad values throw
/// ContractError naming the key. `ansatz` defaults to the formulation's.
TrainConfig train_config_from_json(const nlohmann::json& j);
/// Keys accepted by train_config_from_json, sorted.
std::vector<std::string> train_config_keys();

/// Settings of the published tables for "pinn", "phi" and "qsigma".
TrainConfig table_preset(const std::string& table, std::size_t dim);

struct HistoryRow {
  std::uint64_t step = 0;
  LossBreakdown loss;
  double entropy_gap = 0.0;  // NaN unless phi / q-sigma with a closed-form reference
};

struct EvalRow {
  std::uint64_t step = 0;
  RelativeErrors errors;
};

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& h);
void write_eval_csv(std::ostream& os, const std::vector<EvalRow>& e);

struct GapPoint {
  std::uint64_t step;
  double gap;
};
/// Steps that carry an entropy gap, in order.
std::vector<GapPoint> entropy_gap(const std::vector<HistoryRow>& h);
struct GapTrend {
  double initial;  // |mean gap| over the first window
  double final;    // |mean gap| over the last window
};
GapTrend gap_trend(const std::vector<GapPoint>& gaps, std::size_t window = 100);

struct RunManifest {
  std::string status = "running";  // running | ok | failed
  std::string message;
  nlohmann::json config;
  std::string source_id;
  std::string started;
  std::string finished;
  std::uint64_t steps_completed = 0;
  int threads = 1;
  std::map<std::string, double> metrics;
  std::string checkpoint;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  bool operator==(const RunManifest&) const = default;
};

std::string source_id();
std::string utc_timestamp();

struct TrainState {
  ParamVector params;
  AdamState adam;
  Rng rng;
};

struct TrainOptions {
  std::optional<Checkpoint> resume;
  std::filesystem::path checkpoint_path;  // empty: no periodic checkpoints
  std::size_t checkpoint_every = 0;
  std::function<void(const HistoryRow&)> on_step;
};

struct TrainResult {
  TrainState state;
  std::vector<HistoryRow> history;
  std::vector<EvalRow> evals;
  RunManifest manifest;
  bool ok() const { return manifest.status == "ok"; }
};

/// Runs until config.steps updates have been applied in total (counting the
/// resumed ones). Divergence and constraint violations stop the run and mark
/// the manifest failed; other errors propagate.
TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

Checkpoint make_checkpoint(const TrainConfig& config, const TrainState& state);
/// Rebuilds the config stored in a checkpoint's metadata.
TrainConfig checkpoint_config(const Checkpoint& ckpt);

/// Slice errors of `params` against the closed-form reference.
RelativeErrors slice_errors(const TrainConfig& config, const ParamVector& params);

}  // namespace qpme
