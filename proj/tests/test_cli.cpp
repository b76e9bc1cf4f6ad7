// End-to-end checks of the mananet binary: exit codes, emitted files, and
// byte-level determinism of repeated runs.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using std::filesystem::path;

namespace {

const path kBin = MANANET_BIN;

int run(const std::string& args, const std::string& redirect = " >/dev/null 2>&1") {
  const std::string cmd = kBin.string() + " " + args + redirect;
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

struct Workspace {
  path dir;
  Workspace() {
    dir = std::filesystem::temp_directory_path() / ("mananet_cli_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  ~Workspace() { std::filesystem::remove_all(dir); }
  path operator/(const std::string& name) const { return dir / name; }
};

}  // namespace

TEST_CASE("gen: planted corpus files, determinism, and bad kinds") {
  Workspace ws;
  write_file(ws / "spec.txt",
             "num_days = 520\n"
             "noise_per_day = 6\n"
             "signal_strength = 0.8\n"
             "seed = 11\n");

  CHECK(run("gen planted --spec " + (ws / "spec.txt").string() + " --out " +
            (ws / "a").string()) == 0);
  for (const char* f : {"prices.csv", "news.csv", "truth.csv", "genreport.json"}) {
    CHECK(std::filesystem::exists(ws / "a" / f));
  }

  SUBCASE("repeated runs are byte-identical") {
    CHECK(run("gen planted --spec " + (ws / "spec.txt").string() + " --out " +
              (ws / "b").string()) == 0);
    for (const char* f : {"prices.csv", "news.csv", "truth.csv", "genreport.json"}) {
      CHECK(slurp(ws / "a" / f) == slurp(ws / "b" / f));
    }
  }

  SUBCASE("unknown kind and unknown spec key exit 2") {
    CHECK(run("gen nonsense --spec " + (ws / "spec.txt").string() + " --out " +
              (ws / "x").string()) == 2);
    write_file(ws / "bad.txt", "num_days = 520\nbogus_key = 5\n");
    CHECK(run("gen planted --spec " + (ws / "bad.txt").string() + " --out " +
              (ws / "x").string()) == 2);
  }
}

TEST_CASE("analyze: outputs, determinism, and the two-day precondition") {
  Workspace ws;
  write_file(ws / "hspec.txt", "num_days = 40\nnews_min = 20\nnews_max = 30\nseed = 3\n");
  REQUIRE(run("gen homogenization --spec " + (ws / "hspec.txt").string() + " --out " +
              (ws / "corpus").string()) == 0);

  const std::string news = (ws / "corpus" / "news.csv").string();
  CHECK(run("analyze --news " + news + " --out " + (ws / "r1").string()) == 0);
  for (const char* f : {"table2.csv", "std_reduction.csv", "kde_individual.csv",
                        "kde_daily_average.csv", "kde_daily_count.csv", "boxplot_positive.csv",
                        "summary.json"}) {
    CHECK(std::filesystem::exists(ws / "r1" / f));
  }

  SUBCASE("byte-identical on repetition") {
    CHECK(run("analyze --news " + news + " --out " + (ws / "r2").string()) == 0);
    CHECK(slurp(ws / "r1" / "table2.csv") == slurp(ws / "r2" / "table2.csv"));
    CHECK(slurp(ws / "r1" / "summary.json") == slurp(ws / "r2" / "summary.json"));
  }

  SUBCASE("a single-day corpus is rejected") {
    write_file(ws / "one.csv",
               "date,id,pos,neu,neg\n"
               "2020-01-02,a,0.5,0.3,0.2\n"
               "2020-01-02,b,0.2,0.5,0.3\n");
    CHECK(run("analyze --news " + (ws / "one.csv").string() + " --out " +
              (ws / "r3").string()) == 2);
  }

  SUBCASE("unreadable path exits 2") {
    CHECK(run("analyze --news " + (ws / "missing.csv").string() + " --out " +
              (ws / "r4").string()) == 2);
  }

  SUBCASE("optional prices regroup news onto the trading calendar") {
    write_file(ws / "pspec.txt", "num_days = 30\nnoise_per_day = 10\nseed = 5\n");
    REQUIRE(run("gen planted --spec " + (ws / "pspec.txt").string() + " --out " +
                (ws / "pc").string()) == 0);
    CHECK(run("analyze --news " + (ws / "pc" / "news.csv").string() + " --prices " +
              (ws / "pc" / "prices.csv").string() + " --out " + (ws / "r5").string()) == 0);
    CHECK(std::filesystem::exists(ws / "r5" / "table2.csv"));
  }
}

namespace {

std::string tiny_train_config(const Workspace& ws, const std::string& out_name) {
  return "prices = " + (ws / "corpus").string() + "/prices.csv\n" +
         "news = " + (ws / "corpus").string() + "/news.csv\n" +
         "out = " + (ws / out_name).string() + "\n" +
         "seed = 9\n"
         "d_k = 3\nd_v = 4\nd_e = 4\nhidden_width = 8\n"
         "epsilon_grid = 8\n"
         "t_grid = 1\n"
         "epochs = 8\n"
         "patience = 8\n"
         "learning_rate = 0.002\n";
}

}  // namespace

TEST_CASE("train/backtest/weights pipeline") {
  Workspace ws;
  write_file(ws / "spec.txt", "num_days = 520\nnoise_per_day = 6\nseed = 11\n");
  REQUIRE(run("gen planted --spec " + (ws / "spec.txt").string() + " --out " +
              (ws / "corpus").string()) == 0);

  write_file(ws / "train.cfg", tiny_train_config(ws, "run1"));
  REQUIRE(run("train --config " + (ws / "train.cfg").string()) == 0);
  CHECK(std::filesystem::exists(ws / "run1" / "window_0.ckpt"));
  CHECK(std::filesystem::exists(ws / "run1" / "trials.jsonl"));
  CHECK(std::filesystem::exists(ws / "run1" / "history_window_0.csv"));

  SUBCASE("identical config and seed give identical logs and checkpoints") {
    write_file(ws / "train2.cfg", tiny_train_config(ws, "run2"));
    REQUIRE(run("train --config " + (ws / "train2.cfg").string()) == 0);
    CHECK(slurp(ws / "run1" / "trials.jsonl") == slurp(ws / "run2" / "trials.jsonl"));
    CHECK(slurp(ws / "run1" / "window_0.ckpt") == slurp(ws / "run2" / "window_0.ckpt"));
  }

  SUBCASE("unknown config key exits 2 before any compute") {
    write_file(ws / "bad.cfg", tiny_train_config(ws, "runx") + "mystery_knob = 1\n");
    CHECK(run("train --config " + (ws / "bad.cfg").string()) == 2);
  }

  SUBCASE("backtest replays checkpoints and compares baselines") {
    const std::string cmd = "backtest --config " + (ws / "train.cfg").string() +
                            " --checkpoints " + (ws / "run1").string() +
                            " --aggregator mana --aggregator af --aggregator cf" +
                            " --pnl-mode directional";
    CHECK(run(cmd) == 0);
    CHECK(std::filesystem::exists(ws / "run1" / "backtest_mana.json"));
    CHECK(std::filesystem::exists(ws / "run1" / "backtest_af.json"));
    CHECK(std::filesystem::exists(ws / "run1" / "backtest_mana_window_0.csv"));
    CHECK(std::filesystem::exists(ws / "run1" / "comparison.csv"));
    CHECK(std::filesystem::exists(ws / "run1" / "pnl_mana.svg"));

    const std::string header = slurp(ws / "run1" / "backtest_mana_window_0.csv");
    CHECK(header.find("date,pred,label,flag,return,contribution") == 0);
  }

  SUBCASE("mana backtest without checkpoints exits 2") {
    CHECK(run("backtest --config " + (ws / "train.cfg").string() +
              " --aggregator mana --pnl-mode as-written") == 2);
    CHECK(run("backtest --config " + (ws / "train.cfg").string() + " --checkpoints " +
              (ws / "empty").string() + " --aggregator mana --pnl-mode as-written") == 2);
  }

  SUBCASE("price-only never reads the news file") {
    // Point the config at a news path that does not exist: the run must
    // still succeed because price-only never opens it.
    std::string cfg = tiny_train_config(ws, "runp");
    const auto pos = cfg.find("news = ");
    const auto end = cfg.find('\n', pos);
    cfg.replace(pos, end - pos, "news = " + (ws / "does_not_exist.csv").string());
    write_file(ws / "ponly.cfg", cfg);
    CHECK(run("backtest --config " + (ws / "ponly.cfg").string() +
              " --aggregator price-only --pnl-mode directional") == 0);
    CHECK(std::filesystem::exists(ws / "runp" / "backtest_price-only.json"));

    // A news-reading aggregator with the same config must fail.
    CHECK(run("backtest --config " + (ws / "ponly.cfg").string() +
              " --aggregator af --pnl-mode directional") == 2);
  }

  SUBCASE("weights report with ground truth") {
    const std::string cmd = "weights --checkpoint " + (ws / "run1").string() + "/window_0.ckpt" +
                            " --news " + (ws / "corpus").string() + "/news.csv" + " --prices " +
                            (ws / "corpus").string() + "/prices.csv" + " --truth " +
                            (ws / "corpus").string() + "/truth.csv" + " --out " +
                            (ws / "wr").string();
    CHECK(run(cmd) == 0);
    CHECK(std::filesystem::exists(ws / "wr" / "weights_pooled.csv"));
    CHECK(std::filesystem::exists(ws / "wr" / "percentiles.csv"));
    CHECK(std::filesystem::exists(ws / "wr" / "weights.svg"));
    const std::string report = slurp(ws / "wr" / "weight_report.json");
    CHECK(report.find("fraction_above_0.98") != std::string::npos);
    CHECK(report.find("planted_mean_normalized_weight") != std::string::npos);
  }

  SUBCASE("epsilon-0 identity hook reproduces the af backtest end to end") {
    std::string cfg = tiny_train_config(ws, "hooked");
    cfg += "identity_value_hook = true\n";
    const auto grid = cfg.find("epsilon_grid = 8");
    cfg.replace(grid, std::string("epsilon_grid = 8").size(), "epsilon_grid = 0");
    // the d_v=4 default from tiny_train_config must become 3 for identity values
    const auto dv = cfg.find("d_v = 4");
    cfg.replace(dv, 7, "d_v = 3");
    write_file(ws / "hook.cfg", cfg);
    REQUIRE(run("train --config " + (ws / "hook.cfg").string()) == 0);
    REQUIRE(run("backtest --config " + (ws / "hook.cfg").string() + " --checkpoints " +
                (ws / "hooked").string() + " --aggregator mana --pnl-mode directional") == 0);

    std::string af_cfg = cfg;
    const auto out_pos = af_cfg.find("out = ");
    af_cfg.replace(out_pos, af_cfg.find('\n', out_pos) - out_pos,
                   "out = " + (ws / "afrun").string());
    const auto hook_pos = af_cfg.find("identity_value_hook = true");
    af_cfg.replace(hook_pos, std::string("identity_value_hook = true").size(),
                   "identity_value_hook = false");
    write_file(ws / "af.cfg", af_cfg);
    REQUIRE(run("backtest --config " + (ws / "af.cfg").string() +
                " --aggregator af --pnl-mode directional") == 0);

    // Per-day records agree: same dates, predictions, and contributions to
    // within printout precision (17 significant digits).
    const auto mana_csv = slurp(ws / "hooked" / "backtest_mana_window_0.csv");
    const auto af_csv = slurp(ws / "afrun" / "backtest_af_window_0.csv");
    CHECK(mana_csv == af_csv);
  }

  SUBCASE("MANANET_SEED overrides the config seed") {
    write_file(ws / "train3.cfg", tiny_train_config(ws, "run3"));
    const std::string cmd = "MANANET_SEED=777 " + kBin.string() + " train --config " +
                            (ws / "train3.cfg").string() + " >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(slurp(ws / "run3" / "trials.jsonl") != slurp(ws / "run1" / "trials.jsonl"));
    const std::string log = slurp(ws / "run3" / "trials.jsonl");
    CHECK(log.find("\"seed\":777") != std::string::npos);
  }
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("train") == 2);  // missing --config
}
