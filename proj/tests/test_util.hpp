#pragma once

// Shared builders for synthetic fixtures used across the test binaries.

#include <string>
#include <vector>

#include "mananet/core.hpp"
#include "mananet/rng.hpp"

namespace testutil {

inline mananet::core::PriceBar make_bar(const std::string& date, double open, double high,
                                        double low, double close, double volume = 1000.0) {
  mananet::core::PriceBar b;
  b.date = mananet::Date::parse(date);
  b.open = open;
  b.high = high;
  b.low = low;
  b.close = close;
  b.adj_close = close;
  b.volume = volume;
  return b;
}

/// Flat-ish bar whose open/high/low hug the close.
inline mananet::core::PriceBar simple_bar(const std::string& date, double close,
                                          double volume = 1000.0) {
  return make_bar(date, close, close * 1.001, close * 0.999, close, volume);
}

inline mananet::core::SentimentTriple random_triple(mananet::Rng& rng) {
  const double a = rng.uniform() + 1e-9;
  const double b = rng.uniform() + 1e-9;
  const double c = rng.uniform() + 1e-9;
  const double sum = a + b + c;
  return {a / sum, b / sum, c / sum};
}

/// Random-walk bars on consecutive weekdays starting 2015-01-05.
inline std::vector<mananet::core::PriceBar> random_bars(int n, uint64_t seed) {
  using namespace mananet;
  Rng rng = Rng::stream(seed, 0x6A55);
  std::vector<core::PriceBar> bars;
  bars.reserve(n);
  Date date = Date::from_ymd(2015, 1, 5);
  double close = 500.0;
  for (int i = 0; i < n; ++i) {
    core::PriceBar b;
    b.date = date;
    b.close = close;
    b.adj_close = close * 0.99;
    b.open = close * (1.0 + 0.004 * (rng.uniform() - 0.5));
    b.high = std::max(b.open, b.close) * (1.0 + 0.002 * rng.uniform());
    b.low = std::min(b.open, b.close) * (1.0 - 0.002 * rng.uniform());
    b.volume = 1000.0 * std::exp(0.5 * (rng.uniform() - 0.5));
    bars.push_back(b);
    close *= 1.0 + 0.02 * (rng.uniform() - 0.5);
    date = date.plus_days(1);
    if (date.weekday() >= 5) date = date.plus_days(7 - date.weekday());
  }
  return bars;
}

/// News on the bar dates; day d gets news_counts[d % len] items.
inline std::vector<mananet::core::DailyNews> patterned_news(
    const std::vector<mananet::core::PriceBar>& bars, const std::vector<int>& news_counts,
    uint64_t seed) {
  using namespace mananet;
  std::vector<core::DailyNews> days;
  days.reserve(bars.size());
  for (size_t d = 0; d < bars.size(); ++d) {
    Rng rng = Rng::stream(seed, d + 1);
    core::DailyNews day;
    day.date = bars[d].date;
    const int n = news_counts[d % news_counts.size()];
    for (int i = 0; i < n; ++i) {
      day.items.push_back(core::NewsItem{
          "t" + std::to_string(d) + "-" + std::to_string(i), random_triple(rng)});
    }
    days.push_back(day);
  }
  return days;
}

/// Aligned dataset over random bars with the given per-day news count
/// pattern; feature stats fitted on the full range.
inline mananet::core::AlignedDataset random_dataset(int num_days,
                                                    const std::vector<int>& news_counts,
                                                    uint64_t seed, int lookback = 1) {
  using namespace mananet;
  const auto bars = random_bars(num_days, seed);
  const auto news = patterned_news(bars, news_counts, seed ^ 0x77);
  const auto stats = core::fit_feature_stats(bars, {0, num_days});
  return core::align(bars, news, lookback, stats);
}

}  // namespace testutil
