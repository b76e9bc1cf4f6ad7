#include "mananet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mananet/errors.hpp"
#include "mananet/eval.hpp"
#include "mananet/rng.hpp"

namespace mananet::train {

std::vector<WindowSplit> make_windows(int num_days, int max_windows) {
  if (num_days < kWindowLength) {
    throw ValidationError("make_windows: need >= " + std::to_string(kWindowLength) +
                          " days, got " + std::to_string(num_days));
  }
  if (max_windows < 1) throw ValidationError("make_windows: max_windows must be >= 1");
  const int last = std::min(max_windows - 1, (num_days - kWindowLength) / kWindowStride);
  std::vector<WindowSplit> windows;
  windows.reserve(static_cast<size_t>(last) + 1);
  for (int k = 0; k <= last; ++k) {
    const int start = kWindowStride * k;
    WindowSplit w;
    w.index = k;
    w.train = {start, start + kTrainLength};
    w.val = {w.train.end, w.train.end + kValLength};
    w.test = {w.val.end, start + kWindowLength};
    windows.push_back(w);
  }
  return windows;
}

std::vector<int> sample_days(const core::AlignedDataset& ds, core::IndexRange range, int lookback,
                             bool labels_within_range) {
  if (range.begin < 0 || range.end > ds.num_days()) {
    throw ValidationError("sample_days: range outside dataset");
  }
  std::vector<int> days;
  for (int d = std::max(range.begin, lookback); d < range.end; ++d) {
    if (!ds.records[d].label) continue;
    if (labels_within_range && d + 1 >= range.end) continue;
    days.push_back(d);
  }
  return days;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ValidationError("learning_rate must be > 0");
  if (momentum < 0 || momentum >= 1) throw ValidationError("momentum must lie in [0, 1)");
  if (!(clip_norm > 0)) throw ValidationError("clip_norm must be > 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (patience < 1) throw ValidationError("patience must be >= 1");
}

namespace {

double global_norm(model::ModelParams& g) {
  double ss = 0;
  for (const auto& t : model::tensor_refs(g)) {
    for (double x : *t.data) ss += x * x;
  }
  return std::sqrt(ss);
}

void scale_all(model::ModelParams& g, double factor) {
  for (const auto& t : model::tensor_refs(g)) {
    for (double& x : *t.data) x *= factor;
  }
}

// v = momentum * v + g; p -= lr * v
void momentum_step(model::ModelParams& params, model::ModelParams& velocity,
                   model::ModelParams& grad, double momentum, double lr) {
  auto pv = model::tensor_refs(params);
  auto vv = model::tensor_refs(velocity);
  auto gv = model::tensor_refs(grad);
  for (size_t t = 0; t < pv.size(); ++t) {
    auto& p = *pv[t].data;
    auto& v = *vv[t].data;
    auto& g = *gv[t].data;
    for (size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      p[i] -= lr * v[i];
    }
  }
}

// Full batch below 256 samples, fixed-size minibatches otherwise.
std::vector<std::vector<int>> make_batches(const std::vector<int>& order, int batch_size) {
  std::vector<std::vector<int>> batches;
  if (static_cast<int>(order.size()) < 256) {
    batches.push_back(order);
    return batches;
  }
  for (size_t i = 0; i < order.size(); i += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(order.size(), i + static_cast<size_t>(batch_size));
    batches.emplace_back(order.begin() + i, order.begin() + end);
  }
  return batches;
}

}  // namespace

TrainResult train_model(const core::AlignedDataset& ds, const WindowSplit& split,
                        const model::ModelConfig& model_config, const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (split.test.end > ds.num_days()) {
    throw ValidationError("train_model: dataset does not cover the split");
  }

  const auto train_days = sample_days(ds, split.train, model_config.lookback, true);
  const auto val_days = sample_days(ds, split.val, model_config.lookback, true);
  if (train_days.empty()) throw ValidationError("train_model: no labeled training days");
  if (val_days.empty()) throw ValidationError("train_model: no labeled validation days");

  model::ModelParams params = model::init_params(model_config);
  model::ModelParams velocity = model::make_zero_params(model_config);

  TrainResult result;
  result.params = params;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    std::vector<int> order = train_days;
    Rng shuffle_rng = Rng::stream(train_config.seed, static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0;
    size_t loss_n = 0;
    int step = 0;
    for (const auto& batch : make_batches(order, train_config.batch_size)) {
      auto res = model::batch_gradient_parallel(model_config, params, ds, batch);
      if (!std::isfinite(res.mean_loss)) {
        throw DivergedError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step));
      }
      const double norm = global_norm(res.grad);
      if (!std::isfinite(norm)) {
        throw DivergedError("gradient diverged at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step));
      }
      if (norm > train_config.clip_norm) {
        scale_all(res.grad, train_config.clip_norm / norm);
      }
      momentum_step(params, velocity, res.grad, train_config.momentum,
                    train_config.learning_rate);
      // A pathological step can overflow the parameters themselves; catch it
      // here so the next forward pass never sees non-finite weights.
      if (!std::isfinite(global_norm(params))) {
        throw DivergedError("parameters diverged at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step));
      }
      loss_sum += res.mean_loss * static_cast<double>(batch.size());
      loss_n += batch.size();
      ++step;
    }

    const double val_loss = model::batch_loss(model_config, params, ds, val_days);
    const auto val_preds = model::predict_parallel(model_config, params, ds, val_days);
    std::vector<int> val_labels(val_days.size());
    for (size_t i = 0; i < val_days.size(); ++i) val_labels[i] = *ds.records[val_days[i]].label;

    result.history.train_loss.push_back(loss_sum / static_cast<double>(loss_n));
    result.history.val_loss.push_back(val_loss);
    result.history.val_accuracy.push_back(eval::accuracy(val_preds, val_labels));

    if (val_loss < best_val_loss) {
      best_val_loss = val_loss;
      result.params = params;
      result.history.chosen_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= train_config.patience) break;
    }
  }
  return result;
}

namespace {

struct ValMetrics {
  double loss = 0;
  double accuracy = 0;
  double pnl = 0;
  std::optional<double> sharpe;
};

ValMetrics range_metrics(const model::ModelConfig& config, const model::ModelParams& params,
                         const core::AlignedDataset& ds, const std::vector<int>& days,
                         eval::PnlMode mode, double r_f) {
  ValMetrics m;
  m.loss = model::batch_loss(config, params, ds, days);
  const auto preds = model::predict_parallel(config, params, ds, days);
  std::vector<int> labels(days.size());
  std::vector<double> closes(days.size() + 1);
  for (size_t i = 0; i < days.size(); ++i) {
    labels[i] = *ds.records[days[i]].label;
    closes[i] = ds.records[days[i]].close;
  }
  closes.back() = ds.records[days.back() + 1].close;
  m.accuracy = eval::accuracy(preds, labels);
  m.pnl = eval::pnl(preds, closes, mode);
  try {
    m.sharpe = eval::sharpe(preds, closes, r_f, mode);
  } catch (const UndefinedSharpeError&) {
    m.sharpe = std::nullopt;
  }
  return m;
}

// Defined Sharpe beats undefined; then accuracy; then smaller epsilon, then
// smaller lookback.
bool better_trial(const TrialRecord& a, const TrialRecord& b) {
  if (a.val_sharpe.has_value() != b.val_sharpe.has_value()) return a.val_sharpe.has_value();
  if (a.val_sharpe && b.val_sharpe && *a.val_sharpe != *b.val_sharpe) {
    return *a.val_sharpe > *b.val_sharpe;
  }
  if (a.val_accuracy != b.val_accuracy) return a.val_accuracy > b.val_accuracy;
  if (a.epsilon != b.epsilon) return a.epsilon < b.epsilon;
  return a.lookback < b.lookback;
}

}  // namespace

TuneResult tune(const core::AlignedDataset& ds, const WindowSplit& split,
                const model::ModelConfig& base, const TrainConfig& train_config,
                std::span<const double> epsilon_grid, std::span<const int> t_grid,
                eval::PnlMode mode, double r_f, bool log_timing) {
  if (epsilon_grid.empty() || t_grid.empty()) {
    throw ValidationError("tune: grids must be non-empty");
  }

  TuneResult result;
  bool have_best = false;
  TrialRecord best_record;

  for (int t : t_grid) {
    for (double eps : epsilon_grid) {
      model::ModelConfig config = base;
      config.epsilon = eps;
      config.lookback = t;

      TrialRecord rec;
      rec.window = split.index;
      rec.epsilon = eps;
      rec.lookback = t;
      rec.seed = config.seed;

      const auto t0 = std::chrono::steady_clock::now();
      try {
        TrainResult trained = train_model(ds, split, config, train_config);
        const auto val_days = sample_days(ds, split.val, t, true);
        const auto test_days = sample_days(ds, split.test, t, false);
        const ValMetrics vm = range_metrics(config, trained.params, ds, val_days, mode, r_f);
        rec.chosen_epoch = trained.history.chosen_epoch;
        rec.val_loss = vm.loss;
        rec.val_accuracy = vm.accuracy;
        rec.val_pnl = vm.pnl;
        rec.val_sharpe = vm.sharpe;
        if (!test_days.empty()) {
          const ValMetrics tm = range_metrics(config, trained.params, ds, test_days, mode, r_f);
          rec.test_accuracy = tm.accuracy;
          rec.test_pnl = tm.pnl;
          rec.test_sharpe = tm.sharpe;
        }
        if (log_timing) {
          rec.wall_seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        if (!have_best || better_trial(rec, best_record)) {
          have_best = true;
          best_record = rec;
          result.best_config = config;
          result.params = std::move(trained.params);
          result.history = std::move(trained.history);
        }
      } catch (const DivergedError&) {
        rec.diverged = true;
        if (log_timing) {
          rec.wall_seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
      }
      result.trials.push_back(rec);
    }
  }

  if (!have_best) {
    throw TuningFailedError("tune: every trial diverged in window " +
                            std::to_string(split.index));
  }
  return result;
}

}  // namespace mananet::train
