#include "mananet/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include <json.hpp>

#include "mananet/aggregate.hpp"
#include "mananet/checkpoint.hpp"
#include "mananet/core.hpp"
#include "mananet/data.hpp"
#include "mananet/errors.hpp"
#include "mananet/eval.hpp"
#include "mananet/model.hpp"
#include "mananet/rng.hpp"
#include "mananet/runconfig.hpp"
#include "mananet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mananet::cli {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

json json_opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Minimal deterministic polyline plot.
void write_line_svg(const fs::path& path, std::span<const double> ys, const std::string& title) {
  const int width = 640, height = 360, margin = 40;
  double lo = ys.empty() ? 0.0 : *std::min_element(ys.begin(), ys.end());
  double hi = ys.empty() ? 1.0 : *std::max_element(ys.begin(), ys.end());
  if (hi == lo) {
    hi += 1.0;
    lo -= 1.0;
  }
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<text x=\"" << margin << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"2\" y=\"" << margin << "\" font-size=\"10\">" << fmt(hi) << "</text>\n";
  out << "<text x=\"2\" y=\"" << height - margin << "\" font-size=\"10\">" << fmt(lo)
      << "</text>\n";
  if (!ys.empty()) {
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    const double span_x = static_cast<double>(width - 2 * margin);
    const double span_y = static_cast<double>(height - 2 * margin);
    for (size_t i = 0; i < ys.size(); ++i) {
      const double x = margin + span_x * (ys.size() == 1 ? 0.5
                                                         : static_cast<double>(i) /
                                                               static_cast<double>(ys.size() - 1));
      const double y = height - margin - span_y * (ys[i] - lo) / (hi - lo);
      out << fmt(x) << "," << fmt(y) << (i + 1 == ys.size() ? "" : " ");
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

const char* kChannelNames[3] = {"positive", "neutral", "negative"};

void write_stats_row(std::ofstream& out, const std::string& level, const std::string& channel,
                     const agg::SummaryStats& s) {
  out << level << "," << channel << "," << fmt(s.mean) << "," << fmt(s.std) << "," << fmt(s.median)
      << "," << fmt(s.iqr) << "," << fmt(s.skewness) << "," << fmt(s.kurtosis) << "\n";
}

uint64_t env_seed_or(uint64_t fallback) {
  if (const char* env = std::getenv("MANANET_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ValidationError("MANANET_SEED: malformed integer");
    return static_cast<uint64_t>(v);
  }
  return fallback;
}

}  // namespace

int cmd_analyze(const std::string& news_path, const std::string& prices_path,
                const std::string& out_dir) {
  return run_guarded([&] {
    auto news = data::load_news(news_path);
    int dropped = 0;
    if (!prices_path.empty()) {
      const auto bars = data::load_prices(prices_path);
      news = core::roll_forward_news(bars, news, &dropped);
    }
    const auto report = agg::homogenization_report(news);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    {
      auto table = open_out(out / "table2.csv");
      table << "level,channel,mean,std_dev,median,iqr,skewness,kurtosis\n";
      for (int c = 0; c < 3; ++c) {
        write_stats_row(table, "individual", kChannelNames[c], report.channels[c].individual);
      }
      for (int c = 0; c < 3; ++c) {
        write_stats_row(table, "daily_average", kChannelNames[c],
                        report.channels[c].daily_average);
      }
      for (int c = 0; c < 3; ++c) {
        write_stats_row(table, "daily_count_ratio", kChannelNames[c],
                        report.channels[c].daily_count_ratio);
      }
    }
    {
      auto red = open_out(out / "std_reduction.csv");
      red << "channel,individual_std,daily_average_std,std_reduction\n";
      for (int c = 0; c < 3; ++c) {
        red << kChannelNames[c] << "," << fmt(report.channels[c].individual.std) << ","
            << fmt(report.channels[c].daily_average.std) << ","
            << fmt(report.channels[c].std_reduction) << "\n";
      }
    }
    {
      auto kde_i = open_out(out / "kde_individual.csv");
      auto kde_a = open_out(out / "kde_daily_average.csv");
      auto kde_c = open_out(out / "kde_daily_count.csv");
      kde_i << "pos,neu,neg\n";
      kde_a << "pos,neu,neg\n";
      kde_c << "pos,neu,neg\n";
      for (const auto& day : news) {
        if (day.empty()) continue;
        for (const auto& item : day.items) {
          kde_i << fmt(item.sentiment.pos) << "," << fmt(item.sentiment.neu) << ","
                << fmt(item.sentiment.neg) << "\n";
        }
        const auto af = agg::aggregate_af(day);
        const auto cf = agg::aggregate_cf(day);
        kde_a << fmt(af[0]) << "," << fmt(af[1]) << "," << fmt(af[2]) << "\n";
        kde_c << fmt(cf[0]) << "," << fmt(cf[1]) << "," << fmt(cf[2]) << "\n";
      }
    }
    {
      // Boxplot quantiles of per-item positive scores for up to 30 sampled
      // non-empty days.
      std::vector<int> eligible;
      for (size_t i = 0; i < news.size(); ++i) {
        if (!news[i].empty()) eligible.push_back(static_cast<int>(i));
      }
      Rng rng = Rng::stream(0xB0B0, 0);
      rng.shuffle(eligible);
      const size_t take = std::min<size_t>(30, eligible.size());
      std::vector<int> sample(eligible.begin(), eligible.begin() + take);
      std::sort(sample.begin(), sample.end());

      auto box = open_out(out / "boxplot_positive.csv");
      box << "date,min,q1,median,q3,max,mean\n";
      for (int i : sample) {
        std::vector<double> pos;
        for (const auto& item : news[i].items) pos.push_back(item.sentiment.pos);
        std::sort(pos.begin(), pos.end());
        double mean = 0;
        for (double p : pos) mean += p;
        mean /= static_cast<double>(pos.size());
        box << news[i].date.str() << "," << fmt(pos.front()) << "," << fmt(agg::quantile(pos, 0.25))
            << "," << fmt(agg::quantile(pos, 0.5)) << "," << fmt(agg::quantile(pos, 0.75)) << ","
            << fmt(pos.back()) << "," << fmt(mean) << "\n";
      }
    }
    {
      json j;
      j["days_used"] = report.days_used;
      j["skipped_days"] = report.skipped_days;
      j["dropped_trailing_news_days"] = dropped;
      for (int c = 0; c < 3; ++c) {
        j["std_reduction"][kChannelNames[c]] = report.channels[c].std_reduction;
      }
      open_out(out / "summary.json") << j.dump(2) << "\n";
    }
  });
}

int cmd_gen(const std::string& kind, const std::string& spec_path, const std::string& out_dir) {
  return run_guarded([&] {
    KeyValueFile kv = KeyValueFile::parse(spec_path);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    if (kind == "homogenization") {
      data::CorpusSpec spec;
      spec.num_days = kv.get_int("num_days", spec.num_days);
      spec.news_min = kv.get_int("news_min", spec.news_min);
      spec.news_max = kv.get_int("news_max", spec.news_max);
      const std::string model = kv.get_string("model", "table2");
      if (model == "table2") {
        spec.model = data::SentimentModel::Table2Matched;
      } else if (model == "dirichlet") {
        spec.model = data::SentimentModel::DirichletLike;
      } else {
        throw ValidationError("gen: model must be table2|dirichlet, got '" + model + "'");
      }
      const auto alpha = kv.get_double_list("alpha", {spec.alpha[0], spec.alpha[1], spec.alpha[2]});
      if (alpha.size() != 3) throw ValidationError("gen: alpha needs exactly 3 entries");
      std::copy(alpha.begin(), alpha.end(), spec.alpha.begin());
      spec.seed = env_seed_or(kv.get_uint64("seed", spec.seed));
      kv.require_consumed();

      const auto [corpus, report] = data::gen_homogenization_corpus(spec);
      data::write_news(out / "news.csv", corpus);
      json j;
      j["num_days"] = report.num_days;
      j["num_items"] = report.num_items;
      for (int c = 0; c < 3; ++c) {
        j["alpha"][kChannelNames[c]] = report.alpha_used[c];
        j["target_mean"][kChannelNames[c]] = report.target_mean[c];
        j["achieved_mean"][kChannelNames[c]] = report.achieved_mean[c];
      }
      j["target_pos_std"] = report.target_pos_std;
      j["achieved_pos_std"] = report.achieved_pos_std;
      open_out(out / "genreport.json") << j.dump(2) << "\n";
    } else if (kind == "planted") {
      data::PlantedSignalSpec spec;
      spec.num_days = kv.get_int("num_days", spec.num_days);
      spec.noise_news_per_day = kv.get_int("noise_per_day", spec.noise_news_per_day);
      spec.signal_strength = kv.get_double("signal_strength", spec.signal_strength);
      spec.base_volatility = kv.get_double("base_volatility", spec.base_volatility);
      spec.base_drift = kv.get_double("base_drift", spec.base_drift);
      spec.seed = env_seed_or(kv.get_uint64("seed", spec.seed));
      kv.require_consumed();

      const auto corpus = data::gen_planted_signal_corpus(spec);
      data::write_prices(out / "prices.csv", corpus.bars);
      data::write_news(out / "news.csv", corpus.news);
      data::write_truth(out / "truth.csv", corpus.truth);
      json j;
      j["num_days"] = spec.num_days;
      j["noise_per_day"] = spec.noise_news_per_day;
      j["signal_strength"] = spec.signal_strength;
      j["base_volatility"] = spec.base_volatility;
      j["base_drift"] = spec.base_drift;
      j["planted_items"] = corpus.truth.size();
      open_out(out / "genreport.json") << j.dump(2) << "\n";
    } else {
      throw ValidationError("gen: kind must be homogenization|planted, got '" + kind + "'");
    }
  });
}

namespace {

json trial_to_json(const train::TrialRecord& r) {
  json j;
  j["window"] = r.window;
  j["epsilon"] = r.epsilon;
  j["t"] = r.lookback;
  j["seed"] = r.seed;
  j["diverged"] = r.diverged;
  j["chosen_epoch"] = r.chosen_epoch;
  j["val_loss"] = r.val_loss;
  j["val_accuracy"] = r.val_accuracy;
  j["val_pnl"] = r.val_pnl;
  j["val_sharpe"] = json_opt(r.val_sharpe);
  j["test_accuracy"] = r.test_accuracy;
  j["test_pnl"] = r.test_pnl;
  j["test_sharpe"] = json_opt(r.test_sharpe);
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

fs::path checkpoint_name(const fs::path& dir, int window) {
  return dir / ("window_" + std::to_string(window) + ".ckpt");
}

}  // namespace

int cmd_train(const std::string& config_path) {
  return run_guarded([&] {
    RunConfig cfg = RunConfig::load(config_path);
    if (cfg.prices_path.empty()) throw ValidationError("config: 'prices' is required");
    const bool needs_news = cfg.model.aggregator != model::AggregatorKind::PriceOnly;
    if (needs_news && cfg.news_path.empty()) throw ValidationError("config: 'news' is required");

    const auto bars = data::load_prices(cfg.prices_path);
    const std::vector<core::DailyNews> news =
        needs_news ? data::load_news(cfg.news_path) : std::vector<core::DailyNews>{};

    const auto windows = train::make_windows(static_cast<int>(bars.size()), cfg.max_windows);
    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    auto trial_log = open_out(out / "trials.jsonl");

    for (const auto& window : windows) {
      const auto stats = core::fit_feature_stats(bars, window.train);
      const auto ds = core::align(bars, news, cfg.model.lookback, stats);
      auto tuned = train::tune(ds, window, cfg.model, cfg.train, cfg.epsilon_grid, cfg.t_grid,
                               cfg.pnl_mode, cfg.r_f, cfg.log_timing);

      save_checkpoint(checkpoint_name(out, window.index),
                      model::Checkpoint{tuned.best_config, stats, tuned.params});
      for (const auto& trial : tuned.trials) trial_log << trial_to_json(trial).dump() << "\n";

      auto hist = open_out(out / ("history_window_" + std::to_string(window.index) + ".csv"));
      hist << "epoch,train_loss,val_loss,val_accuracy,chosen\n";
      for (size_t e = 0; e < tuned.history.train_loss.size(); ++e) {
        hist << e << "," << fmt(tuned.history.train_loss[e]) << ","
             << fmt(tuned.history.val_loss[e]) << "," << fmt(tuned.history.val_accuracy[e]) << ","
             << (static_cast<int>(e) == tuned.history.chosen_epoch ? 1 : 0) << "\n";
      }
      std::cout << "window " << window.index << ": epsilon=" << tuned.best_config.epsilon
                << " t=" << tuned.best_config.lookback << "\n";
    }
  });
}

namespace {

struct AggregatorRun {
  std::string name;
  eval::BacktestSummary summary;
};

void write_backtest_outputs(const fs::path& out, const std::string& name,
                            const eval::BacktestSummary& summary) {
  std::vector<double> cumulative;
  double acc = 0;
  for (const auto& w : summary.windows) {
    auto csv = open_out(out / ("backtest_" + name + "_window_" + std::to_string(w.window_index) +
                               ".csv"));
    csv << "date,pred,label,flag,return,contribution\n";
    for (const auto& d : w.days) {
      csv << d.date.str() << "," << d.pred << "," << d.label << "," << d.flag << "," << fmt(d.ret)
          << "," << fmt(d.contribution) << "\n";
      acc += d.contribution;
      cumulative.push_back(acc);
    }
  }

  json j;
  j["aggregator"] = name;
  j["mode"] = to_string(summary.windows.front().mode);
  j["mean_accuracy"] = summary.mean_accuracy;
  j["mean_pnl"] = summary.mean_pnl;
  j["mean_sharpe"] = json_opt(summary.mean_sharpe);
  j["undefined_sharpe_windows"] = summary.undefined_sharpe_windows;
  for (const auto& w : summary.windows) {
    json jw;
    jw["window"] = w.window_index;
    jw["accuracy"] = w.accuracy;
    jw["pnl"] = w.pnl;
    jw["sharpe"] = json_opt(w.sharpe);
    jw["days"] = w.days.size();
    j["windows"].push_back(jw);
  }
  open_out(out / ("backtest_" + name + ".json")) << j.dump(2) << "\n";
  write_line_svg(out / ("pnl_" + name + ".svg"), cumulative,
                 "cumulative PnL (" + name + ", test days across windows)");
}

}  // namespace

int cmd_backtest(const std::string& config_path, const std::string& checkpoints_dir,
                 const std::vector<std::string>& aggregators, const std::string& pnl_mode) {
  return run_guarded([&] {
    RunConfig cfg = RunConfig::load(config_path);
    const eval::PnlMode mode = eval::pnl_mode_from_string(pnl_mode);
    if (cfg.prices_path.empty()) throw ValidationError("config: 'prices' is required");
    if (aggregators.empty()) throw ValidationError("backtest: need at least one aggregator");

    const auto bars = data::load_prices(cfg.prices_path);
    const auto windows = train::make_windows(static_cast<int>(bars.size()), cfg.max_windows);

    // The news file is read lazily so that price-only runs never touch it.
    std::optional<std::vector<core::DailyNews>> news;
    auto get_news = [&]() -> const std::vector<core::DailyNews>& {
      if (!news) {
        if (cfg.news_path.empty()) throw ValidationError("config: 'news' is required");
        news = data::load_news(cfg.news_path);
      }
      return *news;
    };

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    std::vector<AggregatorRun> runs;

    for (const std::string& name : aggregators) {
      const model::AggregatorKind kind = model::aggregator_from_string(name);
      std::vector<eval::BacktestReport> reports;

      if (kind == model::AggregatorKind::Mana) {
        if (checkpoints_dir.empty()) {
          throw ValidationError("backtest: mana needs --checkpoints");
        }
        for (const auto& window : windows) {
          const fs::path ckpt_path = checkpoint_name(checkpoints_dir, window.index);
          if (!fs::exists(ckpt_path)) {
            throw IoError("missing checkpoint " + ckpt_path.string());
          }
          const auto ckpt = model::load_checkpoint(ckpt_path);
          const auto ds = core::align(bars, get_news(), ckpt.config.lookback, ckpt.stats);
          reports.push_back(
              eval::backtest_window(ckpt.config, ckpt.params, ds, window, mode, cfg.r_f));
        }
      } else {
        // Baselines retrain their own head on the substituted representation;
        // only the aggregation changes.
        model::ModelConfig mc = cfg.model;
        mc.aggregator = kind;
        mc.identity_value_hook = false;
        const std::vector<core::DailyNews> empty_news;
        const auto& news_ref =
            kind == model::AggregatorKind::PriceOnly ? empty_news : get_news();
        for (const auto& window : windows) {
          // Per-window feature stats keep the representation leakage-free;
          // the datasets differ per window, so backtest_window is applied
          // directly rather than through eval::backtest.
          const auto stats = core::fit_feature_stats(bars, window.train);
          const auto ds = core::align(bars, news_ref, mc.lookback, stats);
          const auto trained = train::train_model(ds, window, mc, cfg.train);
          reports.push_back(eval::backtest_window(mc, trained.params, ds, window, mode, cfg.r_f));
        }
      }

      AggregatorRun run;
      run.name = name;
      run.summary = eval::summarize(std::move(reports));
      write_backtest_outputs(out, name, run.summary);
      runs.push_back(std::move(run));
    }

    auto cmp = open_out(out / "comparison.csv");
    cmp << "aggregator,mean_accuracy,mean_pnl,mean_sharpe\n";
    for (const auto& run : runs) {
      cmp << run.name << "," << fmt(run.summary.mean_accuracy) << ","
          << fmt(run.summary.mean_pnl) << ","
          << (run.summary.mean_sharpe ? fmt(*run.summary.mean_sharpe) : "undefined") << "\n";
    }
  });
}

int cmd_weights(const std::string& checkpoint_path, const std::string& news_path,
                const std::string& prices_path, const std::string& truth_path,
                const std::string& out_dir) {
  return run_guarded([&] {
    const auto ckpt = model::load_checkpoint(checkpoint_path);
    const auto bars = data::load_prices(prices_path);
    const auto news = data::load_news(news_path);
    const auto ds = core::align(bars, news, ckpt.config.lookback, ckpt.stats);
    data::PlantedTruth truth;
    if (!truth_path.empty()) truth = data::load_truth(truth_path);

    const auto report = eval::weight_report(ckpt.config, ckpt.params, ds, truth);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    {
      auto pooled = open_out(out / "weights_pooled.csv");
      pooled << "normalized_weight\n";
      for (double w : report.pooled) pooled << fmt(w) << "\n";
    }
    {
      auto pct = open_out(out / "percentiles.csv");
      pct << "percentile,normalized_weight\n";
      for (const auto& [p, v] : report.percentiles) pct << p << "," << fmt(v) << "\n";
    }
    json j;
    j["days_used"] = report.days_used;
    j["degenerate_days"] = report.degenerate_days;
    j["ineligible_days"] = report.ineligible_days;
    j["pooled_weights"] = report.pooled.size();
    j["fraction_above_0.98"] = report.fraction_above_098;
    j["fraction_below_0.5"] = report.fraction_below_05;
    if (report.has_truth) {
      j["planted_mean_normalized_weight"] = report.planted_mean_normalized_weight;
      j["planted_argmax_fraction"] = report.planted_argmax_fraction;
    }
    open_out(out / "weight_report.json") << j.dump(2) << "\n";

    std::vector<double> curve;
    for (const auto& [p, v] : report.percentiles) curve.push_back(v);
    write_line_svg(out / "weights.svg", curve, "normalized weight percentiles {50,80,95,98,99}");
  });
}

}  // namespace mananet::cli
