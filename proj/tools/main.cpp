#include <CLI11.hpp>
#include <iostream>

#include "spnmkl/cli.hpp"

int main(int argc, char** argv) {
  using namespace spnmkl;
  CLI::App app{"Structured multiple kernel learning with sum-product kernel networks"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::string log_level = "info";
  std::uint64_t seed = 0;
  std::size_t max_paths = 0;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--log-level", log_level, "error, warn, info or debug")->capture_default_str();
    cmd->add_option("--format", opts.format, "Data format: csv or libsvm (default: by extension)");
  };

  auto* train = app.add_subcommand("train", "Train a model from an experiment config");
  train->add_option("--config", opts.config, "Experiment config (JSON)")->required();
  train->add_option("--data", opts.data, "Training data, overrides the config");
  train->add_option("--out", opts.out, "Model file, overrides the config");
  train->add_option("--seed", seed, "Seed for synthetic data sources");
  train->add_option("--max-paths", max_paths, "Cap on the number of expanded paths");
  common(train);

  auto* pred = app.add_subcommand("predict", "Predict with a trained model");
  pred->add_option("--model", opts.model, "Model file")->required();
  pred->add_option("--data", opts.data, "Data file, labeled or not")->required();
  pred->add_option("--out", opts.out, "Predictions file (default: stdout)");
  common(pred);

  auto* inspect = app.add_subcommand("inspect", "Report weights, path weightings and penalty coefficients");
  auto* model_opt = inspect->add_option("--model", opts.model, "Model file");
  inspect->add_option("--config", opts.config, "Experiment config, for an untrained structure")->excludes(model_opt);
  inspect->add_option("--data", opts.data, "Training data, enables the complexity report");
  inspect->add_option("--max-paths", max_paths, "Cap on the number of expanded paths");
  common(inspect);

  auto* gen = app.add_subcommand("gen-synth", "Write a seeded synthetic dataset");
  gen->add_option("--kind", opts.kind, "two-gaussians, xor-rings or k-blobs")->required();
  gen->add_option("--n", opts.n, "Number of samples")->capture_default_str();
  gen->add_option("--k", opts.k, "Number of blobs for k-blobs")->capture_default_str();
  gen->add_option("--seed", seed, "Random seed")->capture_default_str();
  gen->add_option("--out", opts.out, "Output file (default: stdout)");
  common(gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << format_error(Error(ErrorKind::parse, e.what())) << '\n';
    return exit_code(ErrorKind::parse);
  }

  auto* cmd = app.get_subcommands().front();
  auto given = [cmd](const char* name) {
    auto* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--seed")) opts.seed = seed;
  if (given("--max-paths")) opts.max_paths = max_paths;
  try {
    opts.log_level = log_level_from_string(log_level);
  } catch (const Error& e) {
    std::cerr << format_error(e) << '\n';
    return exit_code(e.kind());
  }
  return run_command(cmd->get_name(), opts, std::cout, std::cerr);
}
