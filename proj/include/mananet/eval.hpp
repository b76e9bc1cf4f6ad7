#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mananet/core.hpp"
#include "mananet/model.hpp"
#include "mananet/train.hpp"

namespace mananet::eval {

/// AsWritten credits +r_d for any correct call (the literal flag formula);
/// Directional holds a long/short position from the prediction itself.
enum class PnlMode : int { AsWritten, Directional };

std::string to_string(PnlMode mode);
PnlMode pnl_mode_from_string(const std::string& s);

/// Fraction of matching entries.
double accuracy(std::span<const int> preds, std::span<const int> labels);

/// Signed daily returns under the selected mode. closes has one more entry
/// than preds; r_d = (close[d+1] - close[d]) / close[d].
std::vector<double> flagged_returns(std::span<const int> preds, std::span<const double> closes,
                                    PnlMode mode);

double pnl(std::span<const int> preds, std::span<const double> closes, PnlMode mode);

/// (mean(flagged) - r_f) / sample_std(flagged). Throws UndefinedSharpeError
/// on a zero-variance series rather than returning +-inf.
double sharpe(std::span<const int> preds, std::span<const double> closes, double r_f,
              PnlMode mode);

struct DayOutcome {
  Date date;
  int pred = 0;
  int label = 0;
  int flag = 0;
  double ret = 0;
  double contribution = 0;
};

struct BacktestReport {
  int window_index = 0;
  PnlMode mode = PnlMode::AsWritten;
  std::vector<DayOutcome> days;
  double accuracy = 0;
  double pnl = 0;
  std::optional<double> sharpe;  // absent when the return series is constant
};

struct BacktestSummary {
  std::vector<BacktestReport> windows;
  double mean_accuracy = 0;
  double mean_pnl = 0;
  /// Mean over windows with a defined Sharpe; absent if there are none.
  std::optional<double> mean_sharpe;
  int undefined_sharpe_windows = 0;
};

/// Metrics over one window's test range.
BacktestReport backtest_window(const model::ModelConfig& config,
                               const model::ModelParams& params, const core::AlignedDataset& ds,
                               const train::WindowSplit& split, PnlMode mode, double r_f);

/// Cross-window arithmetic means.
BacktestSummary summarize(std::vector<BacktestReport> windows);

/// Per-window test metrics plus the cross-window mean report. One trained
/// parameter set per split, in split order.
BacktestSummary backtest(const model::ModelConfig& config,
                         std::span<const model::ModelParams> window_params,
                         const core::AlignedDataset& ds,
                         std::span<const train::WindowSplit> splits, PnlMode mode, double r_f);

struct WeightReport {
  /// Per-day min-max-normalized attention weights, pooled across days.
  std::vector<double> pooled;
  std::vector<std::pair<int, double>> percentiles;  // at {50, 80, 95, 98, 99}
  double fraction_above_098 = 0;
  double fraction_below_05 = 0;
  int days_used = 0;
  /// Days whose weights were all equal; min-max is undefined there, so they
  /// are excluded and counted instead.
  int degenerate_days = 0;
  int ineligible_days = 0;  // fewer than 2 news items or no features
  bool has_truth = false;
  double planted_mean_normalized_weight = 0;
  double planted_argmax_fraction = 0;
};

/// News-weight distribution over the eligible days of the dataset, optionally
/// restricted to a day range (e.g. a window's test range). `truth` maps dates
/// to planted news ids.
WeightReport weight_report(const model::ModelConfig& config, const model::ModelParams& params,
                           const core::AlignedDataset& ds,
                           std::span<const std::pair<Date, std::string>> truth = {},
                           std::optional<core::IndexRange> day_range = std::nullopt);

}  // namespace mananet::eval
