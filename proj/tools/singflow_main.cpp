// Command-line front end: singflow <experiment-name> --config <path>
// [--seed N] [--out DIR]. Exit codes: 0 pass, 1 threshold fail, 2 config
// error, 3 runtime error.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "singflow/singflow.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulation toolkit for singular homogeneous ODE systems "
               "with small-scale regularization"};
  std::string experiment, config_path, out_dir;
  long long seed = -1;
  app.add_option("experiment", experiment, "Experiment name")
      ->required()
      ->check(CLI::IsMember(singflow::experiment_names()));
  app.add_option("--config", config_path, "JSON configuration file")
      ->required();
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", out_dir, "Override the output directory");
  CLI11_PARSE(app, argc, argv);

  singflow::ExperimentConfig cfg;
  try {
    cfg = singflow::load_config(config_path);
    if (cfg.experiment != experiment)
      throw singflow::config_error(
          "config is for experiment '" + cfg.experiment + "'", "experiment");
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (const char* env = std::getenv("OUTPUT_DIR"); env && out_dir.empty())
      cfg.output_dir = env;
  } catch (const singflow::config_error& e) {
    std::fprintf(stderr, "config error at %s: %s\n", e.field_path().c_str(),
                 e.what());
    return 2;
  }

  try {
    const auto report = singflow::run_experiment(cfg);
    singflow::write_report(report, cfg);
    std::printf("experiment: %s\nstatus: %s\n", report.experiment.c_str(),
                report.status.c_str());
    for (const auto& n : report.notes) std::printf("%s\n", n.c_str());
    std::printf("report: %s/report.json\n", cfg.output_dir.c_str());
    return report.status == "pass" ? 0 : 1;
  } catch (const singflow::config_error& e) {
    std::fprintf(stderr, "config error at %s: %s\n", e.field_path().c_str(),
                 e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 3;
  }
}
