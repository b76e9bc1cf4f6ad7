#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mananet/date.hpp"

namespace mananet::core {

/// Half-open index interval [begin, end).
struct IndexRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool contains(int i) const { return i >= begin && i < end; }
};

/// One daily OHLCV bar. Prices are strictly positive; volume may be zero.
struct PriceBar {
  Date date;
  double open = 0;
  double high = 0;
  double low = 0;
  double close = 0;
  double adj_close = 0;
  double volume = 0;
};

/// Throws ValidationError naming the offending date on any bar that breaks
/// low <= min(open, close), high >= max(open, close), positivity, or on
/// duplicate / out-of-order dates.
void validate_bars(std::span<const PriceBar> bars);

/// Per-news (positive, neutral, negative) scores on the probability simplex.
struct SentimentTriple {
  double pos = 0;
  double neu = 0;
  double neg = 0;

  double channel(int c) const { return c == 0 ? pos : (c == 1 ? neu : neg); }
};

/// Applies the ingestion rule: a raw sum within 1e-6 of 1 is accepted as-is,
/// a sum within 1e-3 is renormalized, anything worse is rejected. Negative
/// scores are rejected outright.
SentimentTriple ingest_triple(double pos, double neu, double neg);

struct NewsItem {
  std::string id;
  SentimentTriple sentiment;
};

struct DailyNews {
  Date date;
  std::vector<NewsItem> items;

  int count() const { return static_cast<int>(items.size()); }
  bool empty() const { return items.empty(); }
};

/// Normalization constants fitted on a training range only.
struct FeatureStats {
  double log_volume_mean = 0;
  double log_volume_std = 0;
  double close_mean = 0;
  double close_std = 0;
  bool log_volume_zero_var = false;
  bool close_zero_var = false;
};

inline constexpr int kPriceFeatureDim = 6;

/// Encoded daily price vector: [close log-return, adj-close log-return,
/// (high-low)/close, (close-open)/open, z(log volume), z(close)].
using PriceFeatureVector = std::array<double, kPriceFeatureDim>;

struct DayRecord {
  Date date;
  double close = 0;
  double adj_close = 0;
  /// Absent on the first record of a dataset (no previous bar for returns).
  std::optional<PriceFeatureVector> features;
  DailyNews news;
  /// 1 if the next trading day's close is higher. Absent on the last record.
  std::optional<int> label;
};

/// Day-indexed view of aligned prices, news, and labels.
struct AlignedDataset {
  std::vector<DayRecord> records;
  int lookback = 1;
  /// News days dated after the final price bar have no record to roll into.
  int dropped_trailing_news_days = 0;

  int num_days() const { return static_cast<int>(records.size()); }
  /// A day can feed a prediction iff its full lookback window has features,
  /// i.e. it has at least `lookback` predecessors.
  bool usable(int day) const { return day >= lookback && day < num_days(); }
};

/// label[d] = 1 iff closes[d+1] > closes[d]; equality counts as not-increase.
std::vector<int> label_days(std::span<const double> closes);

/// Means/stds of the z-scored raw series (log volume, close) over `range`.
/// Sample std (ddof = 1). Zero-variance series are flagged.
FeatureStats fit_feature_stats(std::span<const PriceBar> bars, IndexRange range);

/// One vector per bar except the first (its returns are undefined).
/// Zero-variance features z-score to exactly 0.
std::vector<PriceFeatureVector> engineer_price_features(std::span<const PriceBar> bars,
                                                        const FeatureStats& stats);

/// Regroups news onto the trading calendar: items dated on a bar keep their
/// day, items on non-trading days roll forward to the next bar. Returns one
/// DailyNews per bar; `dropped_trailing` counts news days after the last bar.
std::vector<DailyNews> roll_forward_news(std::span<const PriceBar> bars,
                                         std::span<const DailyNews> news_days,
                                         int* dropped_trailing = nullptr);

/// Builds the day axis: one record per bar, news rolled forward onto the next
/// trading day, labels from consecutive closes. `stats` must be fitted on a
/// training range by the caller so that no future information leaks into
/// earlier records.
AlignedDataset align(std::span<const PriceBar> bars, std::span<const DailyNews> news_days,
                     int lookback, const FeatureStats& stats);

}  // namespace mananet::core
