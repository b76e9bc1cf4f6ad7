#pragma once

#include <array>
#include <span>
#include <vector>

#include "mananet/core.hpp"
#include "mananet/linalg.hpp"

namespace mananet::agg {

struct AttentionConfig {
  int d_k = 4;
  int d_v = 8;
  double epsilon = 1.0;

  /// epsilon >= 1 in production; epsilon = 0 is reachable only through
  /// test/equivalence configurations, which set `allow_zero_epsilon`.
  void validate(bool allow_zero_epsilon = false) const;
};

struct AttentionOutput {
  std::vector<double> scores;   // a_i, one per news item
  std::vector<double> weights;  // softmax(epsilon * scores), sums to 1
  Vec attf;                     // weighted sum of value vectors, dim d_v
};

/// Scaled dot products: a_i = (query . keys[i]) / sqrt(d_k).
std::vector<double> attention_scores(std::span<const double> query, std::span<const Vec> keys);

/// Difference-enlargement softmax with max-subtraction stabilization.
/// epsilon = 0 collapses to the uniform distribution.
std::vector<double> aggregation_weights(std::span<const double> scores, double epsilon);

/// attf = sum_i weights[i] * values[i].
Vec attention_features(std::span<const double> weights, std::span<const Vec> values);

enum class Polarity { Positive, Neutral, Negative };

/// argmax of the triple; any tie for the maximum classifies as neutral.
Polarity classify(const core::SentimentTriple& s);

/// Count Features: per-category count ratios.
std::array<double, 3> aggregate_cf(const core::DailyNews& day);

struct SenfResult {
  double value = 0.0;
  /// True when the day had no polar (positive/negative) news at all; the
  /// value is then 0 by convention rather than an error.
  bool degenerate = false;
};

/// Sentiment Factor: (num_pos - num_neg) / (num_pos + num_neg).
SenfResult aggregate_senf(const core::DailyNews& day);

/// Sum Features: componentwise sum of the day's triples.
std::array<double, 3> aggregate_sumf(const core::DailyNews& day);

/// Average Features: componentwise mean of the day's triples.
std::array<double, 3> aggregate_af(const core::DailyNews& day);

/// Frequency Aggregation Features: distinct items weighted by how often
/// their news_id repeats within the day.
std::array<double, 3> aggregate_faf(const core::DailyNews& day);

struct SummaryStats {
  double mean = 0;
  double std = 0;       // sample, ddof = 1
  double median = 0;
  double iqr = 0;       // linear-interpolation quartiles
  double skewness = 0;  // Fisher g1
  double kurtosis = 0;  // excess g2
};

/// Constant input yields std = iqr = skewness = kurtosis = 0 by convention.
SummaryStats summary_stats(std::span<const double> values);

/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::span<const double> sorted_values, double q);

struct ChannelReport {
  SummaryStats individual;         // pooled per-item scores
  SummaryStats daily_average;      // per-day AF values
  SummaryStats daily_count_ratio;  // per-day CF ratios
  double std_reduction = 0;        // 1 - std(daily_average) / std(individual)
};

struct HomogenizationReport {
  std::array<ChannelReport, 3> channels;  // pos, neu, neg
  int days_used = 0;
  int skipped_days = 0;  // empty days, excluded from all levels
};

/// Item-level vs daily-aggregated sentiment statistics over a corpus.
/// Needs at least 2 non-empty days.
HomogenizationReport homogenization_report(std::span<const core::DailyNews> corpus);

}  // namespace mananet::agg
