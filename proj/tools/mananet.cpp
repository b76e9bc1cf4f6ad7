#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mananet/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"MANA-Net: market-news attention aggregation and market prediction"};
  app.require_subcommand(1);

  std::string news_path, prices_path, out_dir;
  auto* analyze = app.add_subcommand("analyze", "homogenization statistics for a news file");
  analyze->add_option("--news", news_path, "news CSV")->required();
  analyze->add_option("--prices", prices_path, "optional prices CSV (trading-day regrouping)");
  analyze->add_option("--out", out_dir, "output directory")->required();

  std::string gen_kind, spec_path;
  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("kind", gen_kind, "homogenization|planted")->required();
  gen->add_option("--spec", spec_path, "spec file (key = value)")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  std::string config_path;
  auto* train = app.add_subcommand("train", "sliding-window training with tuning");
  train->add_option("--config", config_path, "run configuration file")->required();

  std::string checkpoints_dir, pnl_mode;
  std::vector<std::string> aggregators;
  auto* backtest = app.add_subcommand("backtest", "backtest aggregators over the windows");
  backtest->add_option("--config", config_path, "run configuration file")->required();
  backtest->add_option("--checkpoints", checkpoints_dir, "checkpoint directory (mana)");
  backtest
      ->add_option("--aggregator", aggregators,
                   "mana|cf|senf|sumf|af|faf|price-only (repeatable)")
      ->required();
  backtest->add_option("--pnl-mode", pnl_mode, "as-written|directional")->required();

  std::string checkpoint_path, truth_path;
  auto* weights = app.add_subcommand("weights", "news-weight distribution report");
  weights->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  weights->add_option("--news", news_path, "news CSV")->required();
  weights->add_option("--prices", prices_path, "prices CSV")->required();
  weights->add_option("--truth", truth_path, "planted ground-truth CSV");
  weights->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mananet::cli::kExitUsage;
  }

  if (analyze->parsed()) return mananet::cli::cmd_analyze(news_path, prices_path, out_dir);
  if (gen->parsed()) return mananet::cli::cmd_gen(gen_kind, spec_path, out_dir);
  if (train->parsed()) return mananet::cli::cmd_train(config_path);
  if (backtest->parsed()) {
    return mananet::cli::cmd_backtest(config_path, checkpoints_dir, aggregators, pnl_mode);
  }
  if (weights->parsed()) {
    return mananet::cli::cmd_weights(checkpoint_path, news_path, prices_path, truth_path, out_dir);
  }
  return mananet::cli::kExitUsage;
}
