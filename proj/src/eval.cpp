#include "mananet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mananet/aggregate.hpp"
#include "mananet/errors.hpp"

namespace mananet::eval {

std::string to_string(PnlMode mode) {
  return mode == PnlMode::AsWritten ? "as-written" : "directional";
}

PnlMode pnl_mode_from_string(const std::string& s) {
  if (s == "as-written") return PnlMode::AsWritten;
  if (s == "directional") return PnlMode::Directional;
  throw ValidationError("unknown pnl mode '" + s + "' (expected as-written|directional)");
}

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw ValidationError("accuracy: need equal non-empty prediction/label lists");
  }
  int hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::vector<double> flagged_returns(std::span<const int> preds, std::span<const double> closes,
                                    PnlMode mode) {
  if (closes.size() != preds.size() + 1) {
    throw ValidationError("flagged_returns: need len(closes) = len(preds) + 1");
  }
  for (double c : closes) {
    if (!(c > 0) || !std::isfinite(c)) throw ValidationError("flagged_returns: non-positive close");
  }
  std::vector<double> out(preds.size());
  for (size_t d = 0; d < preds.size(); ++d) {
    const double r = (closes[d + 1] - closes[d]) / closes[d];
    int flag;
    if (mode == PnlMode::AsWritten) {
      const int label = closes[d + 1] > closes[d] ? 1 : 0;
      flag = preds[d] == label ? 1 : -1;
    } else {
      flag = preds[d] == 1 ? 1 : -1;
    }
    out[d] = flag * r;
  }
  return out;
}

double pnl(std::span<const int> preds, std::span<const double> closes, PnlMode mode) {
  double sum = 0;
  for (double r : flagged_returns(preds, closes, mode)) sum += r;
  return sum;
}

double sharpe(std::span<const int> preds, std::span<const double> closes, double r_f,
              PnlMode mode) {
  if (preds.size() < 2) throw ValidationError("sharpe: need >= 2 predicted days");
  const auto flagged = flagged_returns(preds, closes, mode);
  double mean = 0;
  for (double r : flagged) mean += r;
  mean /= static_cast<double>(flagged.size());
  double ss = 0;
  for (double r : flagged) ss += (r - mean) * (r - mean);
  const double std = std::sqrt(ss / static_cast<double>(flagged.size() - 1));
  if (std == 0.0) throw UndefinedSharpeError("sharpe: flagged returns have zero variance");
  return (mean - r_f) / std;
}

BacktestReport backtest_window(const model::ModelConfig& config,
                               const model::ModelParams& params, const core::AlignedDataset& ds,
                               const train::WindowSplit& split, PnlMode mode, double r_f) {
  const auto days = train::sample_days(ds, split.test, config.lookback, false);
  if (days.empty()) throw ValidationError("backtest_window: no labeled test days");

  const auto preds = model::predict_parallel(config, params, ds, days);

  BacktestReport report;
  report.window_index = split.index;
  report.mode = mode;
  report.days.resize(days.size());
  std::vector<int> labels(days.size());
  std::vector<double> closes(days.size() + 1);
  for (size_t i = 0; i < days.size(); ++i) {
    labels[i] = *ds.records[days[i]].label;
    closes[i] = ds.records[days[i]].close;
  }
  closes.back() = ds.records[days.back() + 1].close;

  const auto flagged = flagged_returns(preds, closes, mode);
  for (size_t i = 0; i < days.size(); ++i) {
    DayOutcome& o = report.days[i];
    o.date = ds.records[days[i]].date;
    o.pred = preds[i];
    o.label = labels[i];
    o.ret = (closes[i + 1] - closes[i]) / closes[i];
    o.flag = mode == PnlMode::AsWritten ? (o.pred == o.label ? 1 : -1) : (o.pred == 1 ? 1 : -1);
    o.contribution = flagged[i];
    report.pnl += o.contribution;
  }
  report.accuracy = accuracy(preds, labels);
  try {
    report.sharpe = sharpe(preds, closes, r_f, mode);
  } catch (const UndefinedSharpeError&) {
    report.sharpe = std::nullopt;
  }
  return report;
}

BacktestSummary summarize(std::vector<BacktestReport> windows) {
  if (windows.empty()) throw ValidationError("summarize: no windows");
  BacktestSummary s;
  double sharpe_sum = 0;
  int sharpe_n = 0;
  for (const auto& w : windows) {
    s.mean_accuracy += w.accuracy;
    s.mean_pnl += w.pnl;
    if (w.sharpe) {
      sharpe_sum += *w.sharpe;
      ++sharpe_n;
    } else {
      ++s.undefined_sharpe_windows;
    }
  }
  const double n = static_cast<double>(windows.size());
  s.mean_accuracy /= n;
  s.mean_pnl /= n;
  if (sharpe_n > 0) s.mean_sharpe = sharpe_sum / sharpe_n;
  s.windows = std::move(windows);
  return s;
}

BacktestSummary backtest(const model::ModelConfig& config,
                         std::span<const model::ModelParams> window_params,
                         const core::AlignedDataset& ds,
                         std::span<const train::WindowSplit> splits, PnlMode mode, double r_f) {
  if (window_params.size() != splits.size()) {
    throw ValidationError("backtest: need one parameter set per window");
  }
  std::vector<BacktestReport> reports;
  reports.reserve(splits.size());
  for (size_t k = 0; k < splits.size(); ++k) {
    reports.push_back(backtest_window(config, window_params[k], ds, splits[k], mode, r_f));
  }
  return summarize(std::move(reports));
}

WeightReport weight_report(const model::ModelConfig& config, const model::ModelParams& params,
                           const core::AlignedDataset& ds,
                           std::span<const std::pair<Date, std::string>> truth,
                           std::optional<core::IndexRange> day_range) {
  if (config.aggregator != model::AggregatorKind::Mana) {
    throw ValidationError("weight_report: attention weights exist only for the mana aggregator");
  }
  std::map<Date, std::string> planted(truth.begin(), truth.end());

  WeightReport report;
  report.has_truth = !planted.empty();
  double planted_weight_sum = 0;
  int planted_n = 0, planted_argmax = 0;

  const int first = day_range ? std::max(0, day_range->begin) : 0;
  const int last = day_range ? std::min(ds.num_days(), day_range->end) : ds.num_days();
  for (int i = first; i < last; ++i) {
    const auto& r = ds.records[i];
    if (!r.features || r.news.count() < 2) {
      ++report.ineligible_days;
      continue;
    }
    const auto [m, att] = model::forward_day(config, params, *r.features, r.news);
    const auto [mn_it, mx_it] = std::minmax_element(att.weights.begin(), att.weights.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx == mn) {
      ++report.degenerate_days;
      continue;
    }
    ++report.days_used;
    // Direct division: the day's max lands on exactly 1.0 and the min on 0.0.
    const double span = mx - mn;
    std::vector<double> norm(att.weights.size());
    for (size_t k = 0; k < att.weights.size(); ++k) norm[k] = (att.weights[k] - mn) / span;
    report.pooled.insert(report.pooled.end(), norm.begin(), norm.end());

    const auto t = planted.find(r.date);
    if (t != planted.end()) {
      for (size_t k = 0; k < r.news.items.size(); ++k) {
        if (r.news.items[k].id == t->second) {
          planted_weight_sum += norm[k];
          ++planted_n;
          planted_argmax += norm[k] == 1.0;
          break;
        }
      }
    }
  }

  if (report.pooled.empty()) {
    throw ValidationError("weight_report: no days with at least 2 news items");
  }

  std::vector<double> sorted = report.pooled;
  std::sort(sorted.begin(), sorted.end());
  for (int p : {50, 80, 95, 98, 99}) {
    report.percentiles.emplace_back(p, agg::quantile(sorted, p / 100.0));
  }
  size_t above = 0, below = 0;
  for (double w : report.pooled) {
    above += w > 0.98;
    below += w < 0.5;
  }
  report.fraction_above_098 = static_cast<double>(above) / report.pooled.size();
  report.fraction_below_05 = static_cast<double>(below) / report.pooled.size();
  if (planted_n > 0) {
    report.planted_mean_normalized_weight = planted_weight_sum / planted_n;
    report.planted_argmax_fraction = static_cast<double>(planted_argmax) / planted_n;
  }
  return report;
}

}  // namespace mananet::eval
