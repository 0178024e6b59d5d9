#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stlctl/pipeline.hpp"

using namespace stlctl;

int main(int argc, char** argv) {
  CLI::App app{"STL-constrained clustered RNN controller synthesis"};
  app.require_subcommand(1);
  app.fallthrough();  // accept the global flags after the subcommand too

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool force = false;
  bool smoke = false;
  app.add_option("--config", config_path, "experiment config JSON (defaults are used if omitted)");
  app.add_option("--seed", seed, "master seed override");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", threads, "worker thread count override");
  app.add_flag("--force", force, "ignore stage caches and recompute");
  app.add_flag("--smoke", smoke, "start from the small smoke-test preset instead of defaults");

  struct Cmd {
    const char* name;
    const char* help;
    StageStatus (Pipeline::*fn)();
  };
  const Cmd cmds[] = {
      {"gen-data", "sample instances and solve per-instance trajectory optimizations", &Pipeline::gen_data},
      {"cluster", "build trajectory similarity features and run X-means", &Pipeline::cluster_stage},
      {"train-classifier", "train the permutation-invariant classification network", &Pipeline::classifier_stage},
      {"partition", "sample training pairs and split them by predicted label", &Pipeline::partition_stage},
      {"train-policies", "train one recurrent policy per cluster", &Pipeline::policies_stage},
      {"train-single", "train the monolithic baseline policy", &Pipeline::single_stage},
      {"evaluate", "roll out both controllers on the test set and compute metrics", &Pipeline::evaluate_stage},
      {"report", "print and save the metric comparison", &Pipeline::report_stage},
  };
  for (const auto& c : cmds) app.add_subcommand(c.name, c.help);
  app.add_subcommand("run-all", "run every stage in order");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = smoke ? ExperimentConfig::smoke() : ExperimentConfig{};
    if (!config_path.empty()) {
      cfg = load_config(config_path);
      if (smoke) {
        std::cerr << "error: --smoke and --config are mutually exclusive\n";
        return 2;
      }
    }
    if (seed) cfg.master_seed = *seed;
    if (threads) cfg.threads = *threads;

    Pipeline pipeline(cfg, out_dir);
    pipeline.set_force(force);
    if (app.got_subcommand("run-all")) {
      pipeline.run_all();
      return 0;
    }
    for (const auto& c : cmds)
      if (app.got_subcommand(c.name)) {
        (pipeline.*c.fn)();
        return 0;
      }
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
