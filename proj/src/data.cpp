#include "mananet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "mananet/errors.hpp"
#include "mananet/rng.hpp"

namespace mananet::data {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& tok, const char* what, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw IoError(std::string("line ") + std::to_string(line_no) + ": malformed " + what + " '" +
                  tok + "'");
  }
  return v;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<core::PriceBar> load_prices(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{
          "date", "open", "high", "low", "close", "adj_close", "volume"}) {
    throw IoError(path.string() + ": expected header date,open,high,low,close,adj_close,volume");
  }

  std::vector<core::PriceBar> bars;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) {
      throw IoError("line " + std::to_string(line_no) + ": expected 7 fields, got " +
                    std::to_string(f.size()));
    }
    core::PriceBar b;
    try {
      b.date = Date::parse(f[0]);
    } catch (const ValidationError& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
    b.open = parse_number(f[1], "open", line_no);
    b.high = parse_number(f[2], "high", line_no);
    b.low = parse_number(f[3], "low", line_no);
    b.close = parse_number(f[4], "close", line_no);
    b.adj_close = parse_number(f[5], "adj_close", line_no);
    b.volume = parse_number(f[6], "volume", line_no);
    bars.push_back(b);
  }

  std::stable_sort(bars.begin(), bars.end(),
                   [](const auto& a, const auto& b) { return a.date < b.date; });
  core::validate_bars(bars);
  return bars;
}

std::vector<core::DailyNews> load_news(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line) ||
      split_csv(line) != std::vector<std::string>{"date", "id", "pos", "neu", "neg"}) {
    throw IoError(path.string() + ": expected header date,id,pos,neu,neg");
  }

  std::map<Date, core::DailyNews> by_date;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) {
      throw IoError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                    std::to_string(f.size()));
    }
    Date date;
    try {
      date = Date::parse(f[0]);
    } catch (const ValidationError& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
    core::SentimentTriple triple;
    try {
      triple = core::ingest_triple(parse_number(f[2], "pos", line_no),
                                   parse_number(f[3], "neu", line_no),
                                   parse_number(f[4], "neg", line_no));
    } catch (const ValidationError& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
    auto& day = by_date[date];
    day.date = date;
    day.items.push_back(core::NewsItem{f[1], triple});
  }

  std::vector<core::DailyNews> days;
  days.reserve(by_date.size());
  for (auto& [date, day] : by_date) days.push_back(std::move(day));
  return days;
}

void write_prices(const std::filesystem::path& path, std::span<const core::PriceBar> bars) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "date,open,high,low,close,adj_close,volume\n";
  for (const auto& b : bars) {
    out << b.date.str() << "," << fmt(b.open) << "," << fmt(b.high) << "," << fmt(b.low) << ","
        << fmt(b.close) << "," << fmt(b.adj_close) << "," << fmt(b.volume) << "\n";
  }
}

void write_news(const std::filesystem::path& path, std::span<const core::DailyNews> days) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "date,id,pos,neu,neg\n";
  for (const auto& day : days) {
    for (const auto& item : day.items) {
      out << day.date.str() << "," << item.id << "," << fmt(item.sentiment.pos) << ","
          << fmt(item.sentiment.neu) << "," << fmt(item.sentiment.neg) << "\n";
    }
  }
}

void write_truth(const std::filesystem::path& path, const PlantedTruth& truth) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "date,planted_id\n";
  for (const auto& [date, id] : truth) out << date.str() << "," << id << "\n";
}

PlantedTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line) ||
      split_csv(line) != std::vector<std::string>{"date", "planted_id"}) {
    throw IoError(path.string() + ": expected header date,planted_id");
  }
  PlantedTruth truth;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw IoError("line " + std::to_string(line_no) + ": expected 2 fields");
    truth.emplace_back(Date::parse(f[0]), f[1]);
  }
  return truth;
}

namespace {

// Weekday calendar: step forward, skipping Saturday/Sunday.
Date next_weekday(Date d) {
  d = d.plus_days(1);
  while (d.weekday() >= 5) d = d.plus_days(1);
  return d;
}

core::SentimentTriple dirichlet_triple(Rng& rng, const std::array<double, 3>& alpha) {
  double g0 = rng.gamma(alpha[0]);
  double g1 = rng.gamma(alpha[1]);
  double g2 = rng.gamma(alpha[2]);
  const double sum = g0 + g1 + g2;
  return core::SentimentTriple{g0 / sum, g1 / sum, g2 / sum};
}

}  // namespace

std::pair<std::vector<core::DailyNews>, GenReport> gen_homogenization_corpus(
    const CorpusSpec& spec) {
  if (spec.num_days < 1) throw ValidationError("corpus spec: num_days must be >= 1");
  if (spec.news_min < 1 || spec.news_max < spec.news_min) {
    throw ValidationError("corpus spec: need 1 <= news_min <= news_max");
  }

  GenReport report;
  std::array<double, 3> alpha{};
  if (spec.model == SentimentModel::Table2Matched) {
    // Reference individual-item moments: positive channel mean/std plus the
    // neutral/negative means; the Dirichlet concentration follows from them.
    const std::array<double, 3> mean{0.360, 0.343, 0.297};
    const double pos_std = 0.268;
    const double pos_var = pos_std * pos_std;
    if (pos_var >= mean[0] * (1.0 - mean[0])) {
      throw ValidationError("table2-matched: positive channel moments infeasible");
    }
    const double alpha0 = mean[0] * (1.0 - mean[0]) / pos_var - 1.0;
    for (int c = 0; c < 3; ++c) alpha[c] = alpha0 * mean[c];
    report.target_mean = mean;
    report.target_pos_std = pos_std;
  } else {
    alpha = spec.alpha;
    double alpha0 = 0;
    for (double a : alpha) {
      if (!(a > 0)) throw ValidationError("corpus spec: alpha entries must be positive");
      alpha0 += a;
    }
    for (int c = 0; c < 3; ++c) report.target_mean[c] = alpha[c] / alpha0;
    report.target_pos_std =
        std::sqrt(report.target_mean[0] * (1.0 - report.target_mean[0]) / (alpha0 + 1.0));
  }
  report.alpha_used = alpha;
  report.num_days = spec.num_days;

  std::vector<core::DailyNews> corpus(spec.num_days);
  Date date = Date::from_ymd(2003, 1, 6);
  for (int d = 0; d < spec.num_days; ++d) {
    Rng rng = Rng::stream(spec.seed, static_cast<uint64_t>(d));
    auto& day = corpus[d];
    day.date = date;
    const int n = rng.uniform_int(spec.news_min, spec.news_max);
    day.items.reserve(n);
    for (int i = 0; i < n; ++i) {
      day.items.push_back(core::NewsItem{
          "h" + std::to_string(d) + "-" + std::to_string(i), dirichlet_triple(rng, alpha)});
    }
    date = next_weekday(date);
  }

  double sum = 0, sum_sq = 0, sum_neu = 0, sum_neg = 0;
  int n_items = 0;
  for (const auto& day : corpus) {
    for (const auto& item : day.items) {
      sum += item.sentiment.pos;
      sum_sq += item.sentiment.pos * item.sentiment.pos;
      sum_neu += item.sentiment.neu;
      sum_neg += item.sentiment.neg;
      ++n_items;
    }
  }
  report.num_items = n_items;
  report.achieved_mean[0] = sum / n_items;
  report.achieved_mean[1] = sum_neu / n_items;
  report.achieved_mean[2] = sum_neg / n_items;
  report.achieved_pos_std = n_items > 1 ? std::sqrt((sum_sq - sum * sum / n_items) / (n_items - 1))
                                        : 0.0;
  return {std::move(corpus), report};
}

PlantedCorpus gen_planted_signal_corpus(const PlantedSignalSpec& spec) {
  if (spec.num_days < 2) throw ValidationError("planted spec: num_days must be >= 2");
  if (spec.noise_news_per_day < 0) throw ValidationError("planted spec: negative noise count");
  if (spec.signal_strength < 0.0 || spec.signal_strength > 1.0) {
    throw ValidationError("planted spec: signal_strength must lie in [0, 1]");
  }
  if (!(spec.base_volatility > 0.0) || spec.base_volatility > 0.15) {
    throw ValidationError("planted spec: base_volatility must lie in (0, 0.15]");
  }
  if (std::abs(spec.base_drift) > 0.01) {
    throw ValidationError("planted spec: |base_drift| must be <= 0.01");
  }

  PlantedCorpus out;
  out.bars.resize(spec.num_days);
  out.news.resize(spec.num_days);
  std::vector<double> returns(spec.num_days, 0.0);

  Date date = Date::from_ymd(2010, 1, 4);
  for (int d = 0; d < spec.num_days; ++d) {
    Rng rng = Rng::stream(spec.seed, static_cast<uint64_t>(d));

    const int polarity = rng.uniform() < 0.5 ? 1 : -1;
    const bool agree = rng.uniform() < 0.5 + spec.signal_strength / 2.0;
    const double magnitude = spec.base_volatility * std::min(std::abs(rng.normal()), 5.0);
    returns[d] = spec.base_drift + (agree ? polarity : -polarity) * magnitude;

    // Planted item: dominant channel well above anything the noise model can
    // produce, neutral share strictly below the polar-noise floor of 0.18.
    const double dominant = rng.uniform(0.85, 0.95);
    const double rest = 1.0 - dominant;
    const double neu_share = rng.uniform(0.5, 0.9);
    const double neu = rest * neu_share;
    const double other = rest * (1.0 - neu_share);
    const core::SentimentTriple planted =
        polarity > 0 ? core::SentimentTriple{dominant, neu, other}
                     : core::SentimentTriple{other, neu, dominant};

    auto& day = out.news[d];
    day.date = date;
    const int n_items = spec.noise_news_per_day + 1;
    const int planted_pos = rng.uniform_int(0, n_items - 1);
    day.items.reserve(n_items);
    for (int k = 0; k < n_items; ++k) {
      const std::string id = "news-" + std::to_string(d) + "-" + std::to_string(k);
      if (k == planted_pos) {
        day.items.push_back(core::NewsItem{id, planted});
        out.truth.emplace_back(date, id);
      } else {
        // Noise comes in two flavors. Most items keep a high neutral share.
        // A fraction is polarized with random direction, so the mere
        // presence of an extreme sentiment carries no label information;
        // only the planted item (lowest neutral share) does. Polar noise
        // still sits above the planted item's neutral ceiling of ~0.14.
        const bool polar = rng.uniform() < 0.15;
        const double noise_neu = polar ? rng.uniform(0.18, 0.28) : rng.uniform(0.3, 0.7);
        const double u = rng.uniform();
        const double beta = std::sin(u * 1.5707963267948966);  // Beta(1/2, 1/2)
        const double share = beta * beta;
        day.items.push_back(core::NewsItem{
            id, core::SentimentTriple{(1.0 - noise_neu) * share, noise_neu,
                                      (1.0 - noise_neu) * (1.0 - share)}});
      }
    }

    auto& bar = out.bars[d];
    bar.date = date;
    const double z_open = std::clamp(rng.normal(), -3.0, 3.0);
    const double spread_hi = std::min(std::abs(rng.normal()) * 0.002, 0.03);
    const double spread_lo = std::min(std::abs(rng.normal()) * 0.002, 0.03);
    const double z_vol = std::clamp(rng.normal(), -4.0, 4.0);
    bar.open = 1.0 + 0.003 * z_open;  // scaled by close below
    bar.high = spread_hi;
    bar.low = spread_lo;
    bar.volume = 1e6 * std::exp(0.3 * z_vol);
    date = next_weekday(date);
  }

  // Closes accumulate sequentially from the per-day returns.
  double close = 1000.0;
  for (int d = 0; d < spec.num_days; ++d) {
    auto& bar = out.bars[d];
    bar.close = close;
    bar.adj_close = close;
    bar.open = close * bar.open;
    const double top = std::max(bar.open, bar.close);
    const double bottom = std::min(bar.open, bar.close);
    bar.high = top * (1.0 + bar.high);
    bar.low = bottom * (1.0 - bar.low);
    close = close * (1.0 + returns[d]);
  }

  core::validate_bars(out.bars);
  return out;
}

}  // namespace mananet::data
