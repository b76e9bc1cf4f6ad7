#include "mananet/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "mananet/errors.hpp"

namespace mananet::agg {

void AttentionConfig::validate(bool allow_zero_epsilon) const {
  if (d_k < 1 || d_v < 1) throw ValidationError("attention dims must be >= 1");
  if (epsilon < 1.0 && !(allow_zero_epsilon && epsilon == 0.0)) {
    throw ValidationError("epsilon must be >= 1 (0 is admitted only in test mode)");
  }
}

std::vector<double> attention_scores(std::span<const double> query, std::span<const Vec> keys) {
  if (keys.empty()) throw ValidationError("attention_scores: empty day");
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.size()));
  std::vector<double> scores;
  scores.reserve(keys.size());
  for (const Vec& k : keys) {
    if (k.size() != query.size()) throw ValidationError("attention_scores: dimension mismatch");
    scores.push_back(dot(query, k) * scale);
  }
  return scores;
}

std::vector<double> aggregation_weights(std::span<const double> scores, double epsilon) {
  if (scores.empty()) throw ValidationError("aggregation_weights: empty scores");
  if (epsilon < 0) throw ValidationError("aggregation_weights: negative epsilon");

  std::vector<double> w(scores.size());
  double max_s = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw ValidationError("aggregation_weights: NaN score");
    w[i] = epsilon * scores[i];
    max_s = std::max(max_s, w[i]);
  }
  double denom = 0.0;
  for (double& x : w) {
    x = std::exp(x - max_s);
    denom += x;
  }
  for (double& x : w) x /= denom;
  return w;
}

Vec attention_features(std::span<const double> weights, std::span<const Vec> values) {
  if (weights.size() != values.size()) {
    throw ValidationError("attention_features: weights/values length mismatch");
  }
  if (values.empty()) throw ValidationError("attention_features: empty day");
  Vec attf(values.front().size(), 0.0);
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != attf.size()) {
      throw ValidationError("attention_features: value dimension mismatch");
    }
    axpy(weights[i], values[i], attf);
  }
  return attf;
}

Polarity classify(const core::SentimentTriple& s) {
  const double m = std::max({s.pos, s.neu, s.neg});
  const bool pos = s.pos == m, neu = s.neu == m, neg = s.neg == m;
  if (pos && !neu && !neg) return Polarity::Positive;
  if (neg && !neu && !pos) return Polarity::Negative;
  return Polarity::Neutral;
}

namespace {

void require_nonempty(const core::DailyNews& day, const char* op) {
  if (day.empty()) throw ValidationError(std::string(op) + ": empty day " + day.date.str());
}

}  // namespace

std::array<double, 3> aggregate_cf(const core::DailyNews& day) {
  require_nonempty(day, "aggregate_cf");
  std::array<double, 3> counts{0, 0, 0};
  for (const auto& item : day.items) {
    switch (classify(item.sentiment)) {
      case Polarity::Positive: counts[0] += 1; break;
      case Polarity::Neutral: counts[1] += 1; break;
      case Polarity::Negative: counts[2] += 1; break;
    }
  }
  const double n = static_cast<double>(day.count());
  return {counts[0] / n, counts[1] / n, counts[2] / n};
}

SenfResult aggregate_senf(const core::DailyNews& day) {
  require_nonempty(day, "aggregate_senf");
  double num_pos = 0, num_neg = 0;
  for (const auto& item : day.items) {
    switch (classify(item.sentiment)) {
      case Polarity::Positive: num_pos += 1; break;
      case Polarity::Negative: num_neg += 1; break;
      case Polarity::Neutral: break;
    }
  }
  if (num_pos + num_neg == 0) return {0.0, true};
  return {(num_pos - num_neg) / (num_pos + num_neg), false};
}

std::array<double, 3> aggregate_sumf(const core::DailyNews& day) {
  require_nonempty(day, "aggregate_sumf");
  std::array<double, 3> sum{0, 0, 0};
  for (const auto& item : day.items) {
    sum[0] += item.sentiment.pos;
    sum[1] += item.sentiment.neu;
    sum[2] += item.sentiment.neg;
  }
  return sum;
}

std::array<double, 3> aggregate_af(const core::DailyNews& day) {
  auto sum = aggregate_sumf(day);
  const double n = static_cast<double>(day.count());
  return {sum[0] / n, sum[1] / n, sum[2] / n};
}

std::array<double, 3> aggregate_faf(const core::DailyNews& day) {
  require_nonempty(day, "aggregate_faf");
  // Distinct ids in first-appearance order; each carries its first triple and
  // a weight proportional to its repeat count.
  std::vector<std::pair<const core::NewsItem*, double>> distinct;
  for (const auto& item : day.items) {
    auto it = std::find_if(distinct.begin(), distinct.end(),
                           [&](const auto& p) { return p.first->id == item.id; });
    if (it == distinct.end()) {
      distinct.emplace_back(&item, 1.0);
    } else {
      it->second += 1.0;
    }
  }
  // Weighted sum first, one division at the end: with all-unique ids the
  // frequencies are 1 and the result matches aggregate_af bit for bit.
  const double n = static_cast<double>(day.count());
  std::array<double, 3> out{0, 0, 0};
  for (const auto& [item, freq] : distinct) {
    out[0] += freq * item->sentiment.pos;
    out[1] += freq * item->sentiment.neu;
    out[2] += freq * item->sentiment.neg;
  }
  return {out[0] / n, out[1] / n, out[2] / n};
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile: empty input");
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SummaryStats summary_stats(std::span<const double> values) {
  if (values.empty()) throw ValidationError("summary_stats: empty series");
  const double n = static_cast<double>(values.size());

  // Constant input short-circuits to the declared zero convention; the
  // moment accumulators would otherwise leave ~1e-17 residue.
  const bool constant =
      std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
  if (constant) {
    SummaryStats s;
    s.mean = values[0];
    s.median = values[0];
    return s;
  }

  SummaryStats s;
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / n;

  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : values) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;

  s.std = values.size() > 1 ? std::sqrt(m2 * n / (n - 1)) : 0.0;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.median = quantile(sorted, 0.5);
  s.iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);

  if (m2 > 0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

HomogenizationReport homogenization_report(std::span<const core::DailyNews> corpus) {
  std::array<std::vector<double>, 3> individual;
  std::array<std::vector<double>, 3> daily_avg;
  std::array<std::vector<double>, 3> daily_cf;
  int skipped = 0;

  for (const auto& day : corpus) {
    if (day.empty()) {
      ++skipped;
      continue;
    }
    for (const auto& item : day.items) {
      individual[0].push_back(item.sentiment.pos);
      individual[1].push_back(item.sentiment.neu);
      individual[2].push_back(item.sentiment.neg);
    }
    const auto af = aggregate_af(day);
    const auto cf = aggregate_cf(day);
    for (int c = 0; c < 3; ++c) {
      daily_avg[c].push_back(af[c]);
      daily_cf[c].push_back(cf[c]);
    }
  }

  const int days_used = static_cast<int>(daily_avg[0].size());
  if (days_used < 2) {
    throw ValidationError("homogenization_report: need >= 2 non-empty days");
  }

  HomogenizationReport report;
  report.days_used = days_used;
  report.skipped_days = skipped;
  for (int c = 0; c < 3; ++c) {
    ChannelReport& ch = report.channels[c];
    ch.individual = summary_stats(individual[c]);
    ch.daily_average = summary_stats(daily_avg[c]);
    ch.daily_count_ratio = summary_stats(daily_cf[c]);
    ch.std_reduction =
        ch.individual.std > 0 ? 1.0 - ch.daily_average.std / ch.individual.std : 0.0;
  }
  return report;
}

}  // namespace mananet::agg
