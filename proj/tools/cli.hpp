#pragma once

// Command-line front end. Kept apart from main() so tests can drive it.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpme/training.hpp"

namespace qpme::cli {

enum ExitCode { kOk = 0, kFailed = 1, kUsage = 2, kIo = 3 };

/// Keys of an experiment file: every TrainConfig key plus output_dir,
/// paper_table and checkpoint_every. Sorted.
std::vector<std::string> experiment_keys();

/// "--" + key with underscores turned into dashes.
std::string flag_name(const std::string& key);
std::string key_from_flag(const std::string& flag);

/// Default of each experiment key, typed as it appears in a config file.
const nlohmann::json& experiment_defaults();

/// Parses the text given to a flag into the JSON type of its key.
nlohmann::json parse_flag_value(const std::string& key, const std::string& text);

struct Experiment {
  TrainConfig config;
  std::string output_dir = "run";
  std::string paper_table;
  std::size_t checkpoint_every = 0;
};

/// Defaults, then the named table preset, then the file, then flags. Naming a
/// formulation without an ansatz selects that formulation's default ansatz.
Experiment resolve_experiment(const nlohmann::json& file, const nlohmann::json& flags);

/// Runs one subcommand; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qpme::cli
