#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mananet/core.hpp"
#include "mananet/model.hpp"

namespace mananet::eval {
enum class PnlMode : int;
}

namespace mananet::train {

/// One sliding cross-validation window: 500 consecutive days split 8:1:1,
/// windows striding 391 days.
struct WindowSplit {
  int index = 0;
  core::IndexRange train, val, test;
};

inline constexpr int kWindowLength = 500;
inline constexpr int kWindowStride = 391;
inline constexpr int kTrainLength = 400;
inline constexpr int kValLength = 50;

/// Windows k = 0 .. min(max_windows - 1, (num_days - 500) / 391), starting at
/// 391 * k. Throws on fewer than 500 days.
std::vector<WindowSplit> make_windows(int num_days, int max_windows = 10);

/// Days in `range` usable as prediction samples: a full feature lookback and
/// a label. With `labels_within_range`, the label's next-day close must also
/// fall inside the range, so train/val samples never read a later range.
std::vector<int> sample_days(const core::AlignedDataset& ds, core::IndexRange range, int lookback,
                             bool labels_within_range);

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double clip_norm = 5.0;
  int epochs = 200;
  /// Minibatch size in labeled days; epochs with fewer than 256 samples run
  /// full-batch.
  int batch_size = 64;
  int patience = 25;
  uint64_t seed = 42;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  int chosen_epoch = 0;
};

struct TrainResult {
  model::ModelParams params;  // best-validation-loss snapshot
  TrainHistory history;
};

/// Minibatch gradient descent with momentum and global-norm clipping.
/// Deterministic given seeds; throws DivergedError naming the step on a
/// non-finite loss.
TrainResult train_model(const core::AlignedDataset& ds, const WindowSplit& split,
                        const model::ModelConfig& model_config, const TrainConfig& train_config);

struct TrialRecord {
  int window = 0;
  double epsilon = 0;
  int lookback = 0;
  uint64_t seed = 0;
  bool diverged = false;
  int chosen_epoch = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double val_pnl = 0;
  std::optional<double> val_sharpe;
  double test_accuracy = 0;
  double test_pnl = 0;
  std::optional<double> test_sharpe;
  double wall_seconds = 0;  // stays 0 unless timing was requested
};

struct TuneResult {
  model::ModelConfig best_config;
  model::ModelParams params;
  TrainHistory history;
  std::vector<TrialRecord> trials;
};

/// Exhaustive grid search over (epsilon, lookback). Selection: highest
/// validation Sharpe (defined beats undefined), then validation accuracy,
/// then smaller epsilon. Diverged trials are logged and skipped; if every
/// trial diverges a TuningFailedError is thrown.
TuneResult tune(const core::AlignedDataset& ds, const WindowSplit& split,
                const model::ModelConfig& base, const TrainConfig& train_config,
                std::span<const double> epsilon_grid, std::span<const int> t_grid,
                eval::PnlMode mode, double r_f, bool log_timing = false);

}  // namespace mananet::train
