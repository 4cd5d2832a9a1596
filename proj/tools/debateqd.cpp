// Command-line entry point: evolve, staticgen, evaluate, report, diversity,
// validate-config. Exit status follows the error class (see error.hpp).

#include <iostream>

#include "CLI11.hpp"
#include "debateqd/error.hpp"
#include "debateqd/experiment.hpp"

namespace ex = debateqd::experiment;

namespace {

ex::ExperimentConfig config_for(const std::string& path, const std::string& dir_override, std::size_t parallelism,
                                std::string& dir) {
  auto cfg = ex::load_config(path);
  if (parallelism > 0) cfg.parallelism = parallelism;
  dir = dir_override.empty() ? cfg.experiment_dir : dir_override;
  if (dir.empty()) throw debateqd::ConfigError("no experiment directory: set experiment_dir or pass --dir");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quality-diversity evolution of debate strategies"};
  app.require_subcommand(1);

  std::string config_path, dir_override;
  std::size_t parallelism = 0;

  auto* evolve = app.add_subcommand("evolve", "Run (or resume) the generational loop");
  evolve->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  evolve->add_option("-d,--dir", dir_override, "Experiment directory (overrides experiment_dir)");
  evolve->add_option("-j,--parallelism", parallelism, "Concurrent model requests");

  auto* staticgen = app.add_subcommand("staticgen", "Generate and rate the few-shot baseline pool");
  staticgen->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  staticgen->add_option("-d,--dir", dir_override, "Experiment directory (overrides experiment_dir)");
  staticgen->add_option("-j,--parallelism", parallelism, "Concurrent model requests");

  std::string persuasion_dir, truth_dir, out_dir;
  ex::EvaluateOptions eval_opts;
  bool paired = false;
  auto* evaluate = app.add_subcommand("evaluate", "Elite panels and bootstrap gap comparison");
  evaluate->add_option("--persuasion", persuasion_dir, "Persuasion-objective experiment")->required();
  evaluate->add_option("--truth", truth_dir, "Truth-objective experiment")->required();
  evaluate->add_option("-o,--out", out_dir, "Output directory (default <persuasion>/evaluation)");
  evaluate->add_option("--iterations", eval_opts.iterations, "Bootstrap iterations")->capture_default_str();
  evaluate->add_option("--seed", eval_opts.seed, "Bootstrap seed")->capture_default_str();
  evaluate->add_flag("--paired", paired, "Resample index-aligned pairs");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Export CSV/JSON tables and a summary");
  report->add_option("dir", report_dir, "Experiment directory")->required();

  std::vector<std::string> diversity_dirs;
  std::string diversity_out;
  auto* diversity = app.add_subcommand("diversity", "Embedding diversity of strategy pools");
  diversity->add_option("dirs", diversity_dirs, "Experiment directories")->required();
  diversity->add_option("-o,--out", diversity_out, "Output directory (default <first>/evaluation)");

  auto* validate = app.add_subcommand("validate-config", "Check a config file");
  validate->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    std::string dir;
    if (*evolve) {
      const auto cfg = config_for(config_path, dir_override, parallelism, dir);
      return ex::cmd_evolve(cfg, dir, std::cerr);
    }
    if (*staticgen) {
      const auto cfg = config_for(config_path, dir_override, parallelism, dir);
      return ex::cmd_staticgen(cfg, dir, std::cerr);
    }
    if (*evaluate) {
      if (paired) eval_opts.mode = debateqd::analysis::BootstrapMode::paired;
      const std::filesystem::path out = out_dir.empty() ? ex::Paths{persuasion_dir}.evaluation() : std::filesystem::path(out_dir);
      return ex::cmd_evaluate(persuasion_dir, truth_dir, out, eval_opts, std::cerr);
    }
    if (*report) return ex::cmd_report(report_dir, std::cout);
    if (*diversity) {
      const std::filesystem::path out =
          diversity_out.empty() ? ex::Paths{diversity_dirs.front()}.evaluation() : std::filesystem::path(diversity_out);
      std::vector<std::filesystem::path> dirs(diversity_dirs.begin(), diversity_dirs.end());
      return ex::cmd_diversity(dirs, out, std::cout);
    }
    if (*validate) return ex::cmd_validate_config(config_path, std::cout);
  } catch (const debateqd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
