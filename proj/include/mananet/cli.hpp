#pragma once

#include <string>
#include <vector>

namespace mananet::cli {

/// Exit codes shared by every subcommand:
///   0 success, 1 numerical failure (divergence, undefined metric),
///   2 usage/validation problems.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitUsage = 2;

/// Homogenization statistics (table, KDE samples, boxplot quantiles) for a
/// news file, optionally regrouped onto a price calendar.
int cmd_analyze(const std::string& news_path, const std::string& prices_path,
                const std::string& out_dir);

/// Synthetic corpus generation; kind is "homogenization" or "planted".
int cmd_gen(const std::string& kind, const std::string& spec_path, const std::string& out_dir);

/// Sliding-window training with per-window tuning; writes checkpoints,
/// histories, and the trial log.
int cmd_train(const std::string& config_path);

/// Backtests one or more aggregators. "mana" replays checkpoints; baseline
/// aggregators train their own prediction head; "price-only" never reads the
/// news file.
int cmd_backtest(const std::string& config_path, const std::string& checkpoints_dir,
                 const std::vector<std::string>& aggregators, const std::string& pnl_mode);

/// News-weight distribution report for a trained checkpoint.
int cmd_weights(const std::string& checkpoint_path, const std::string& news_path,
                const std::string& prices_path, const std::string& truth_path,
                const std::string& out_dir);

}  // namespace mananet::cli
