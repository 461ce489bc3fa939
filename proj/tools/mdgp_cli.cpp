#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mdgp/bench.hpp"
#include "mdgp/config.hpp"
#include "mdgp/errors.hpp"
#include "mdgp/version.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> workers;
  std::optional<std::string> methods;
  std::optional<double> level;
  std::optional<std::size_t> m_draws;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration file")
      ->required();
  cmd->add_option("--seed", flags.seed, "master seed (overrides config)");
  cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
  cmd->add_option("--replicates", flags.replicates,
                  "replicate count (overrides config)");
  cmd->add_option("--workers", flags.workers,
                  "worker threads (overrides config)");
  cmd->add_option("--methods", flags.methods,
                  "comma-separated method list (overrides config)");
  cmd->add_option("--level", flags.level,
                  "prediction interval level (overrides config)");
  cmd->add_option("--m-draws", flags.m_draws,
                  "MC dropout draws (overrides config)");
}

mdgp::RunConfig resolve(const CommonFlags& flags) {
  mdgp::RunConfig cfg = mdgp::load_run_config(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.replicates) cfg.replicates = *flags.replicates;
  if (flags.workers) cfg.workers = *flags.workers;
  if (flags.level) cfg.predict.level = *flags.level;
  if (flags.m_draws) cfg.predict.m_draws = *flags.m_draws;
  if (flags.methods) {
    cfg.methods.clear();
    std::string cur;
    for (char ch : *flags.methods + ",") {
      if (ch == ',') {
        if (!cur.empty()) cfg.methods.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
  }
  cfg.predict.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(mdgp::kToolName) + " " + mdgp::kToolVersion +
               " - shared deep latent spatial modeling of mixed outcomes"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* sim = app.add_subcommand(
      "simulate", "generate replicate train/test CSV pairs plus a manifest");
  add_common(sim, flags);

  auto* train = app.add_subcommand(
      "train", "fit the model on a dataset CSV, write checkpoint + report");
  add_common(train, flags);
  std::string data_path;
  train->add_option("--data", data_path, "training dataset CSV")->required();

  auto* predict = app.add_subcommand(
      "predict", "MC-dropout predictions for a checkpoint at new locations");
  add_common(predict, flags);
  std::string checkpoint_path, locations_path;
  std::size_t composite_grid = 0;
  predict->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  predict->add_option("--locations", locations_path, "locations CSV")
      ->required();
  predict->add_option("--composite-grid", composite_grid,
                      "also write an R x R IDW composite-score grid");

  auto* bench = app.add_subcommand(
      "bench", "full replicate benchmark: simulate, fit, predict, score");
  add_common(bench, flags);

  auto* eval = app.add_subcommand("eval",
                                  "re-score an existing prediction CSV");
  add_common(eval, flags);
  std::string pred_path, truth_path;
  eval->add_option("--pred", pred_path, "prediction CSV")->required();
  eval->add_option("--truth", truth_path, "truth dataset CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const mdgp::RunConfig cfg = resolve(flags);
    if (sim->parsed()) {
      const auto result = mdgp::cmd_simulate(cfg);
      std::printf("wrote %zu files, manifest %s\n", result.files.size(),
                  result.manifest_path.c_str());
    } else if (train->parsed()) {
      const auto result = mdgp::cmd_train(cfg, data_path);
      std::printf("checkpoint %s\nreport %s\nfinal loss %.6g\n",
                  result.checkpoint_path.c_str(), result.report_path.c_str(),
                  result.final_loss);
    } else if (predict->parsed()) {
      const auto result =
          mdgp::cmd_predict(cfg, checkpoint_path, locations_path,
                            composite_grid);
      std::printf("predictions %s\n", result.predictions_path.c_str());
      if (!result.grid_path.empty()) {
        std::printf("composite grid %s\n", result.grid_path.c_str());
      }
    } else if (bench->parsed()) {
      const auto result = mdgp::cmd_bench(cfg);
      std::printf("report %s\nraw %s\ntimings %s\n",
                  result.report_path.c_str(), result.raw_path.c_str(),
                  result.timings_path.c_str());
      if (!result.failures.empty()) {
        for (const auto& f : result.failures) {
          std::fprintf(stderr, "FAILED %s\n", f.c_str());
        }
        return 2;
      }
    } else if (eval->parsed()) {
      const auto result = mdgp::cmd_eval(cfg, pred_path, truth_path);
      std::printf("eval report %s\n", result.report_path.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
