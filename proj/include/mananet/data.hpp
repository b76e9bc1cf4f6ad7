#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mananet/core.hpp"

namespace mananet::data {

/// CSV with header date,open,high,low,close,adj_close,volume. Rows are
/// validated and sorted (stable) by date; duplicate dates are rejected.
std::vector<core::PriceBar> load_prices(const std::filesystem::path& path);

/// CSV with header date,id,pos,neu,neg, grouped by date and sorted. Applies
/// the simplex tolerance/renormalization rule; violations name the line.
std::vector<core::DailyNews> load_news(const std::filesystem::path& path);

/// Writers use round-trip-exact decimal formatting, so load(write(x)) == x.
void write_prices(const std::filesystem::path& path, std::span<const core::PriceBar> bars);
void write_news(const std::filesystem::path& path, std::span<const core::DailyNews> days);

/// date -> news_id of the day's planted item.
using PlantedTruth = std::vector<std::pair<Date, std::string>>;
void write_truth(const std::filesystem::path& path, const PlantedTruth& truth);
PlantedTruth load_truth(const std::filesystem::path& path);

enum class SentimentModel { DirichletLike, Table2Matched };

struct CorpusSpec {
  int num_days = 250;
  int news_min = 200;
  int news_max = 200;
  SentimentModel model = SentimentModel::Table2Matched;
  /// Concentration for the dirichlet-like model (ignored by table2-matched,
  /// which solves its own concentration from the target moments).
  std::array<double, 3> alpha{1.0, 1.0, 1.0};
  uint64_t seed = 7;
};

struct GenReport {
  std::array<double, 3> alpha_used{};
  std::array<double, 3> target_mean{};
  std::array<double, 3> achieved_mean{};
  double target_pos_std = 0;
  double achieved_pos_std = 0;
  int num_days = 0;
  int num_items = 0;
};

/// Per-day iid sentiment triples on consecutive weekdays. table2-matched mode
/// tunes the concentration so the positive channel hits the target
/// individual-item moments (mean 0.360, std 0.268).
std::pair<std::vector<core::DailyNews>, GenReport> gen_homogenization_corpus(
    const CorpusSpec& spec);

struct PlantedSignalSpec {
  int num_days = 900;
  int noise_news_per_day = 50;
  /// One planted item per day; at the default zero drift the next-day return
  /// sign agrees with its polarity with probability exactly
  /// 0.5 + signal_strength / 2.
  double signal_strength = 0.8;
  double base_volatility = 0.01;
  double base_drift = 0.0;
  uint64_t seed = 7;
};

struct PlantedCorpus {
  std::vector<core::PriceBar> bars;
  std::vector<core::DailyNews> news;
  PlantedTruth truth;
};

/// Synthetic market where exactly one polarized news item per day carries the
/// predictive signal. The planted item is distinguishable only through its
/// sentiment polarization: noise items keep a neutral share >= 0.3 while the
/// planted item's dominant channel is >= 0.85 and its neutral share < 0.14.
PlantedCorpus gen_planted_signal_corpus(const PlantedSignalSpec& spec);

}  // namespace mananet::data
