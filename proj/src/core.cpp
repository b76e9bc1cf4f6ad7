#include "mananet/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mananet/errors.hpp"

namespace mananet::core {

namespace {

double sample_mean(std::span<const double> xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// Volume may legitimately be zero; map its log-feature to 0 so everything
// downstream stays finite.
double log_volume(double volume) { return volume > 0.0 ? std::log(volume) : 0.0; }

}  // namespace

void validate_bars(std::span<const PriceBar> bars) {
  for (size_t i = 0; i < bars.size(); ++i) {
    const PriceBar& b = bars[i];
    const std::string where = " on " + b.date.str();
    if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0 && b.adj_close > 0)) {
      throw ValidationError("non-positive price" + where);
    }
    if (b.volume < 0) throw ValidationError("negative volume" + where);
    if (b.low > std::min(b.open, b.close) || b.high < std::max(b.open, b.close)) {
      throw ValidationError("OHLC bounds violated" + where);
    }
    if (i > 0) {
      if (bars[i].date == bars[i - 1].date) {
        throw ValidationError("duplicate bar date" + where);
      }
      if (bars[i].date < bars[i - 1].date) {
        throw ValidationError("bars not sorted by date" + where);
      }
    }
  }
}

SentimentTriple ingest_triple(double pos, double neu, double neg) {
  if (!(std::isfinite(pos) && std::isfinite(neu) && std::isfinite(neg))) {
    throw ValidationError("sentiment scores must be finite");
  }
  if (pos < 0 || neu < 0 || neg < 0) {
    throw ValidationError("sentiment scores must be non-negative");
  }
  const double sum = pos + neu + neg;
  if (std::abs(sum - 1.0) <= 1e-6) {
    return SentimentTriple{pos, neu, neg};
  }
  if (std::abs(sum - 1.0) <= 1e-3) {
    return SentimentTriple{pos / sum, neu / sum, neg / sum};
  }
  throw ValidationError("sentiment scores sum to " + std::to_string(sum) +
                        ", outside tolerance [0.999, 1.001]");
}

std::vector<int> label_days(std::span<const double> closes) {
  if (closes.size() < 2) throw ValidationError("label_days: need at least 2 closes");
  for (double c : closes) {
    if (!(c > 0) || !std::isfinite(c)) throw ValidationError("label_days: non-positive close");
  }
  std::vector<int> labels(closes.size() - 1);
  for (size_t d = 0; d + 1 < closes.size(); ++d) {
    labels[d] = closes[d + 1] > closes[d] ? 1 : 0;
  }
  return labels;
}

FeatureStats fit_feature_stats(std::span<const PriceBar> bars, IndexRange range) {
  if (range.begin < 0 || range.end > static_cast<int>(bars.size())) {
    throw ValidationError("fit_feature_stats: range outside bars");
  }
  if (range.size() < 2) throw ValidationError("fit_feature_stats: range needs >= 2 bars");

  std::vector<double> lv, cl;
  lv.reserve(range.size());
  cl.reserve(range.size());
  for (int i = range.begin; i < range.end; ++i) {
    lv.push_back(log_volume(bars[i].volume));
    cl.push_back(bars[i].close);
  }

  FeatureStats s;
  s.log_volume_mean = sample_mean(lv);
  s.log_volume_std = sample_std(lv, s.log_volume_mean);
  s.close_mean = sample_mean(cl);
  s.close_std = sample_std(cl, s.close_mean);
  s.log_volume_zero_var = s.log_volume_std == 0.0;
  s.close_zero_var = s.close_std == 0.0;
  return s;
}

std::vector<PriceFeatureVector> engineer_price_features(std::span<const PriceBar> bars,
                                                        const FeatureStats& stats) {
  if (bars.size() < 2) throw ValidationError("engineer_price_features: need >= 2 bars");
  validate_bars(bars);
  if (!(std::isfinite(stats.log_volume_mean) && std::isfinite(stats.log_volume_std) &&
        std::isfinite(stats.close_mean) && std::isfinite(stats.close_std))) {
    throw ValidationError("engineer_price_features: non-finite stats");
  }

  auto zscore = [](double x, double mean, double std, bool zero_var) {
    return zero_var ? 0.0 : (x - mean) / std;
  };

  std::vector<PriceFeatureVector> out;
  out.reserve(bars.size() - 1);
  for (size_t i = 1; i < bars.size(); ++i) {
    const PriceBar& b = bars[i];
    const PriceBar& prev = bars[i - 1];
    PriceFeatureVector f;
    f[0] = std::log(b.close / prev.close);
    f[1] = std::log(b.adj_close / prev.adj_close);
    f[2] = (b.high - b.low) / b.close;
    f[3] = (b.close - b.open) / b.open;
    f[4] = zscore(log_volume(b.volume), stats.log_volume_mean, stats.log_volume_std,
                  stats.log_volume_zero_var);
    f[5] = zscore(b.close, stats.close_mean, stats.close_std, stats.close_zero_var);
    out.push_back(f);
  }
  return out;
}

std::vector<DailyNews> roll_forward_news(std::span<const PriceBar> bars,
                                         std::span<const DailyNews> news_days,
                                         int* dropped_trailing) {
  // News on a non-trading day rolls forward to the next trading day.
  // News past the final bar has nowhere to go and is counted as dropped.
  std::map<Date, std::vector<const DailyNews*>> by_date;
  for (const DailyNews& nd : news_days) by_date[nd.date].push_back(&nd);

  std::vector<DailyNews> out(bars.size());
  for (size_t i = 0; i < bars.size(); ++i) out[i].date = bars[i].date;

  int dropped = 0;
  size_t bar_idx = 0;
  for (const auto& [date, groups] : by_date) {
    while (bar_idx < bars.size() && bars[bar_idx].date < date) ++bar_idx;
    if (bar_idx == bars.size()) {
      ++dropped;
      continue;
    }
    auto& items = out[bar_idx].items;
    for (const DailyNews* g : groups) {
      items.insert(items.end(), g->items.begin(), g->items.end());
    }
  }
  if (dropped_trailing) *dropped_trailing = dropped;
  return out;
}

AlignedDataset align(std::span<const PriceBar> bars, std::span<const DailyNews> news_days,
                     int lookback, const FeatureStats& stats) {
  if (lookback < 1) throw ValidationError("align: lookback must be >= 1");
  if (bars.size() < 2) throw ValidationError("align: need >= 2 bars");
  validate_bars(bars);

  const auto features = engineer_price_features(bars, stats);

  AlignedDataset ds;
  ds.lookback = lookback;
  ds.records.resize(bars.size());
  auto rolled = roll_forward_news(bars, news_days, &ds.dropped_trailing_news_days);
  for (size_t i = 0; i < bars.size(); ++i) {
    DayRecord& r = ds.records[i];
    r.date = bars[i].date;
    r.close = bars[i].close;
    r.adj_close = bars[i].adj_close;
    if (i > 0) r.features = features[i - 1];
    r.news = std::move(rolled[i]);
    if (i + 1 < bars.size()) {
      r.label = bars[i + 1].close > bars[i].close ? 1 : 0;
    }
  }
  return ds;
}

}  // namespace mananet::core
