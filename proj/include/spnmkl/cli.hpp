#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "spnmkl/dataset.hpp"
#include "spnmkl/error.hpp"
#include "spnmkl/trainer.hpp"

namespace spnmkl {

/// Seeded synthetic data described inline in a config.
struct SynthSpec {
  std::string kind;  // two-gaussians, xor-rings, k-blobs
  std::size_t n = 200;
  int k = 3;
};

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// Experiment description. Relative paths are resolved against the config's directory.
struct ExperimentConfig {
  std::optional<std::string> data_path;
  std::optional<DataFormat> data_format;
  std::optional<SynthSpec> synthetic;
  std::string structure_path;
  std::optional<std::string> structure_text;  // inline structure document
  KernelSpecs kernels;
  TrainConfig train;
  std::string model_path = "model.json";
  std::string log_path;  // empty: model path + ".log.jsonl"
};

ExperimentConfig parse_experiment_config(std::string_view text, const std::string& base_dir = ".");
ExperimentConfig read_experiment_config(const std::string& path);

/// Parses the structure with the configured kernel names as the known set.
SpnGraph load_structure(const ExperimentConfig& config);

/// One JSON object per line.
std::string format_log_record(const IterationRecord& rec);

/// Exit code for an error: 2 config/parse, 3 data, 4 degenerate or empty model.
int exit_code(ErrorKind kind);
/// Single-line JSON error record.
std::string format_error(const Error& e);

enum class LogLevel { error, warn, info, debug };
LogLevel log_level_from_string(std::string_view text);

struct CommandOptions {
  std::string config;
  std::string model;
  std::string data;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_paths;
  LogLevel log_level = LogLevel::info;
  // gen-synth
  std::string kind;
  std::size_t n = 200;
  int k = 3;
};

int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_predict(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_inspect(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gen_synth(const CommandOptions& opts, std::ostream& out, std::ostream& err);

/// Dispatches by subcommand name, converting errors into an error record and exit code.
int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace spnmkl
