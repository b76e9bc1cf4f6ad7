#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mananet/aggregate.hpp"
#include "mananet/checkpoint.hpp"
#include "mananet/errors.hpp"
#include "mananet/model.hpp"
#include "mananet/rng.hpp"
#include "test_util.hpp"

using namespace mananet;

namespace {

model::ModelConfig small_config(int lookback = 1, model::HeadKind head = model::HeadKind::Mlp) {
  model::ModelConfig c;
  c.d_k = 3;
  c.d_v = 4;
  c.d_e = 4;
  c.hidden_width = 6;
  c.lookback = lookback;
  c.epsilon = 2.0;
  c.seed = 17;
  c.head = head;
  return c;
}

bool params_bitwise_equal(model::ModelParams& a, model::ModelParams& b) {
  auto ra = model::tensor_refs(a);
  auto rb = model::tensor_refs(b);
  for (size_t t = 0; t < ra.size(); ++t) {
    if (*ra[t].data != *rb[t].data) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_params is deterministic per seed") {
  const auto c = small_config();
  auto p1 = model::init_params(c);
  auto p2 = model::init_params(c);
  CHECK(params_bitwise_equal(p1, p2));

  auto c2 = c;
  c2.seed = 18;
  auto p3 = model::init_params(c2);
  CHECK_FALSE(params_bitwise_equal(p1, p3));
}

TEST_CASE("parameter count matches the closed form") {
  model::ModelConfig c;
  c.d_k = 4;
  c.d_v = 8;
  c.d_e = 8;
  c.hidden_width = 64;
  c.lookback = 1;
  // Wq 4x6 + bq 4, Wk 4x3 + bk 4, Wv 8x3 + bv 8, We 8x6 + be 8,
  // W1 64x16 + b1 64, W2 2x64 + b2 2, no_news 8.
  const size_t expected = (4 * 6 + 4) + (4 * 3 + 4) + (8 * 3 + 8) + (8 * 6 + 8) +
                          (64 * 16 + 64) + (2 * 64 + 2) + 8;
  CHECK(model::param_count(c) == expected);
  CHECK(expected == 1358);

  SUBCASE("shallow head and static aggregators shrink the count") {
    auto shallow = c;
    shallow.head = model::HeadKind::Shallow;
    CHECK(model::param_count(shallow) ==
          (4 * 6 + 4) + (4 * 3 + 4) + (8 * 3 + 8) + (8 * 6 + 8) + (2 * 16 + 2) + 8);

    auto af = c;
    af.aggregator = model::AggregatorKind::Af;
    CHECK(model::param_count(af) == (8 * 6 + 8) + (64 * 11 + 64) + (2 * 64 + 2) + 3);

    auto price = c;
    price.aggregator = model::AggregatorKind::PriceOnly;
    CHECK(model::param_count(price) == (8 * 6 + 8) + (64 * 8 + 64) + (2 * 64 + 2));
  }
}

TEST_CASE("forward_day single item and empty day") {
  const auto c = small_config();
  auto params = model::init_params(c);
  core::PriceFeatureVector feats{0.01, 0.02, 0.003, -0.001, 0.5, -0.2};

  SUBCASE("N=1: AttF equals v(s) with weight 1") {
    core::DailyNews day;
    day.date = Date::from_ymd(2020, 1, 1);
    day.items.push_back({"a", core::ingest_triple(0.6, 0.3, 0.1)});
    const auto [m, att] = model::forward_day(c, params, feats, day);
    REQUIRE(att.weights.size() == 1);
    CHECK(att.weights[0] == 1.0);
    const Vec v = affine(params.Wv, params.bv, Vec{0.6, 0.3, 0.1});
    CHECK(att.attf == v);
    REQUIRE(m.size() == static_cast<size_t>(c.d_e + c.d_v));
  }

  SUBCASE("N=0: rep falls back to the learned no-news vector") {
    params.no_news = Vec{1.5, -2.5, 3.5, 0.25};
    core::DailyNews empty;
    empty.date = Date::from_ymd(2020, 1, 1);
    const auto [m, att] = model::forward_day(c, params, feats, empty);
    CHECK(att.weights.empty());
    CHECK(att.attf == params.no_news);
    for (int i = 0; i < c.d_v; ++i) CHECK(m[c.d_e + i] == params.no_news[i]);
  }

  SUBCASE("an exact duplicate splits weight without changing the weighted sum") {
    core::DailyNews day;
    day.date = Date::from_ymd(2020, 1, 1);
    day.items.push_back({"a", core::ingest_triple(0.6, 0.3, 0.1)});
    day.items.push_back({"b", core::ingest_triple(0.1, 0.2, 0.7)});
    const auto [m1, att1] = model::forward_day(c, params, feats, day);

    auto doubled = day;
    doubled.items.push_back(day.items[0]);  // exact duplicate of "a"
    const auto [m2, att2] = model::forward_day(c, params, feats, doubled);

    // The copies share the score exactly, so they carry equal weights.
    CHECK(att2.scores[0] == att2.scores[2]);
    CHECK(att2.weights[0] == doctest::Approx(att2.weights[2]).epsilon(1e-12));

    // Splitting any item's weight mass over two copies of its value leaves
    // the weighted sum itself unchanged.
    const Vec va = affine(params.Wv, params.bv, Vec{0.6, 0.3, 0.1});
    const Vec vb = affine(params.Wv, params.bv, Vec{0.1, 0.2, 0.7});
    const std::vector<double> split{att1.weights[0] / 2, att1.weights[1], att1.weights[0] / 2};
    const auto recombined = agg::attention_features(split, std::vector<Vec>{va, vb, va});
    for (size_t i = 0; i < recombined.size(); ++i) {
      CHECK(std::abs(recombined[i] - att1.attf[i]) < 1e-15);
    }
  }
}

TEST_CASE("forward_window basics") {
  const auto c = small_config();
  const auto params = model::init_params(c);
  const auto ds = testutil::random_dataset(12, {2, 0, 1, 5}, 21, 1);

  SUBCASE("t=1 reduces to forward_day plus the head") {
    const auto days = model::window_days(ds, 3, 1);
    const auto trace = model::forward_window(c, params, days, -1);
    const auto [m, att] = model::forward_day(c, params, *ds.records[3].features,
                                             ds.records[3].news);
    CHECK(trace.head_in == m);
  }

  SUBCASE("wrong day count is rejected") {
    auto c3 = small_config(3);
    const auto p3 = model::init_params(c3);
    const auto days = model::window_days(ds, 5, 2);
    CHECK_THROWS_AS(model::forward_window(c3, p3, days, 0), ValidationError);
  }

  SUBCASE("permuting days changes the logits for some random instance") {
    auto c3 = small_config(3);
    const auto p3 = model::init_params(c3);
    const auto ds3 = testutil::random_dataset(12, {3, 1, 4}, 77, 3);
    bool changed = false;
    for (int end = 4; end < 10 && !changed; ++end) {
      auto days = model::window_days(ds3, end, 3);
      const auto base = model::forward_window(c3, p3, days, -1);
      std::swap(days[0], days[2]);
      const auto swapped = model::forward_window(c3, p3, days, -1);
      changed = base.logits != swapped.logits;
    }
    CHECK(changed);
  }

  SUBCASE("zero params give logits 0 and probabilities one half") {
    const auto zero = model::make_zero_params(c);
    const auto days = model::window_days(ds, 2, 1);
    const auto trace = model::forward_window(c, zero, days, 1);
    CHECK(trace.logits == Vec{0.0, 0.0});
    CHECK(trace.probs[0] == 0.5);
    CHECK(trace.probs[1] == 0.5);
    CHECK(trace.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("probabilities normalize") {
    const auto days = model::window_days(ds, 6, 1);
    const auto trace = model::forward_window(c, params, days, -1);
    CHECK(std::abs(trace.probs[0] + trace.probs[1] - 1.0) < 1e-12);
  }
}

TEST_CASE("cross-entropy loss fixtures") {
  CHECK(model::loss_from_logits(Vec{0, 0}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(model::loss_from_logits(Vec{0, 0}, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(model::loss_from_logits(Vec{10, -10}, 1) ==
        doctest::Approx(20.0 + std::log1p(std::exp(-20.0))).epsilon(1e-12));

  // shift invariance
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Vec logits{rng.uniform(-8, 8), rng.uniform(-8, 8)};
    const double c = rng.uniform(-30, 30);
    const Vec shifted{logits[0] + c, logits[1] + c};
    CHECK(std::abs(model::loss_from_logits(logits, 1) -
                   model::loss_from_logits(shifted, 1)) < 1e-12);
  }
}

TEST_CASE("backward algebraic facts") {
  SUBCASE("single-news days give exactly zero key/query gradients") {
    const auto c = small_config();
    const auto params = model::init_params(c);
    const auto ds = testutil::random_dataset(10, {1}, 3, 1);  // every day exactly 1 item
    std::vector<int> batch{2, 3, 4, 5};
    const auto res = model::batch_gradient_serial(c, params, ds, batch);
    for (double g : res.grad.Wk.a) CHECK(g == 0.0);
    for (double g : res.grad.bk) CHECK(g == 0.0);
    for (double g : res.grad.Wq.a) CHECK(g == 0.0);
    for (double g : res.grad.bq) CHECK(g == 0.0);
    // Wv does receive gradient: the value encoder still shapes AttF.
    bool any = false;
    for (double g : res.grad.Wv.a) any = any || g != 0.0;
    CHECK(any);
  }

  SUBCASE("no_news gradient is zero when every day has news") {
    const auto c = small_config();
    const auto params = model::init_params(c);
    const auto ds = testutil::random_dataset(10, {2, 3}, 4, 1);
    const auto res = model::batch_gradient_serial(c, params, ds, std::vector<int>{2, 3, 4});
    for (double g : res.grad.no_news) CHECK(g == 0.0);
  }

  SUBCASE("no_news gradient flows on empty days") {
    const auto c = small_config();
    const auto params = model::init_params(c);
    const auto ds = testutil::random_dataset(10, {0}, 4, 1);
    const auto res = model::batch_gradient_serial(c, params, ds, std::vector<int>{2, 3});
    bool any = false;
    for (double g : res.grad.no_news) any = any || g != 0.0;
    CHECK(any);
  }
}

TEST_CASE("grad_check: analytic gradients match central differences") {
  // Instances spanning empty, single, and multi-news days, several lookbacks,
  // both heads.
  for (const auto head : {model::HeadKind::Mlp, model::HeadKind::Shallow}) {
    for (const int t : {1, 3}) {
      auto c = small_config(t, head);
      c.seed = 100 + t;
      const auto params = model::init_params(c);
      const auto ds = testutil::random_dataset(14, {0, 1, 5, 2}, 500 + t, t);
      std::vector<int> batch{t + 1, t + 2, t + 5, t + 7};
      const double err = model::grad_check(c, params, ds, batch, 5e-4);
      INFO("head ", static_cast<int>(head), " t ", t, " err ", err);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("grad_check catches a fault-injected key gradient") {
  auto c = small_config(1);
  const auto params = model::init_params(c);
  const auto ds = testutil::random_dataset(12, {5, 3}, 321, 1);
  std::vector<int> batch{2, 3, 4};

  // Recreate the comparison with the Wk block zeroed out.
  auto res = model::batch_gradient_serial(c, params, ds, batch);
  std::fill(res.grad.Wk.a.begin(), res.grad.Wk.a.end(), 0.0);

  auto probe = params;
  double max_err = 0.0;
  const double h = 1e-5;
  for (size_t i = 0; i < probe.Wk.a.size(); ++i) {
    const double saved = probe.Wk.a[i];
    probe.Wk.a[i] = saved + h;
    const double plus = model::batch_loss(c, probe, ds, batch);
    probe.Wk.a[i] = saved - h;
    const double minus = model::batch_loss(c, probe, ds, batch);
    probe.Wk.a[i] = saved;
    const double numeric = (plus - minus) / (2 * h);
    const double err =
        std::abs(res.grad.Wk.a[i] - numeric) / std::max(1e-8, std::abs(numeric));
    max_err = std::max(max_err, err);
  }
  CHECK(max_err > 1e-2);
}

TEST_CASE("identity value hook ties the model to plain averaging") {
  model::ModelConfig c = small_config();
  c.d_v = 3;
  c.epsilon = 0.0;
  c.identity_value_hook = true;
  const auto params = model::init_params(c);
  const auto ds = testutil::random_dataset(10, {4, 2, 7}, 888, 1);

  for (int day = 1; day < 9; ++day) {
    if (ds.records[day].news.empty()) continue;
    const auto [m, att] = model::forward_day(c, params, *ds.records[day].features,
                                             ds.records[day].news);
    const auto af = agg::aggregate_af(ds.records[day].news);
    for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(att.attf[ch] - af[ch]) < 1e-12);
  }

  SUBCASE("padded identity zeroes the extra value dims") {
    auto cp = c;
    cp.d_v = 5;
    const auto pp = model::init_params(cp);
    const auto [m, att] = model::forward_day(cp, pp, *ds.records[1].features,
                                             ds.records[1].news);
    CHECK(att.attf[3] == 0.0);
    CHECK(att.attf[4] == 0.0);
  }

  SUBCASE("hook validation") {
    auto bad = c;
    bad.aggregator = model::AggregatorKind::Af;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    auto no_hook = small_config();
    no_hook.epsilon = 0.0;
    CHECK_THROWS_AS(no_hook.validate(), ValidationError);
  }
}

TEST_CASE("static aggregators terminate gradients at the representation") {
  auto c = small_config();
  c.aggregator = model::AggregatorKind::Af;
  const auto params = model::init_params(c);
  const auto ds = testutil::random_dataset(10, {3, 2}, 11, 1);
  const auto res = model::batch_gradient_serial(c, params, ds, std::vector<int>{2, 3, 4});
  CHECK(res.grad.Wq.size() == 0);
  CHECK(res.grad.Wk.size() == 0);
  CHECK(res.grad.Wv.size() == 0);
  bool any = false;
  for (double g : res.grad.We.a) any = any || g != 0.0;
  CHECK(any);

  const double err = model::grad_check(c, params, ds, std::vector<int>{2, 3, 4}, 5e-4);
  CHECK(err < 1e-4);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto c = small_config(3);
  const auto params = model::init_params(c);
  core::FeatureStats stats{0.123456789123456789, 1.5e-7, 432.1, 55.5, false, false};

  const auto dir = std::filesystem::temp_directory_path() / "mananet_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "test.ckpt";
  model::save_checkpoint(path, {c, stats, params});
  auto loaded = model::load_checkpoint(path);

  CHECK(loaded.config.d_k == c.d_k);
  CHECK(loaded.config.epsilon == c.epsilon);
  CHECK(loaded.config.head == c.head);
  CHECK(loaded.stats.log_volume_mean == stats.log_volume_mean);
  CHECK(loaded.stats.log_volume_std == stats.log_volume_std);
  auto mutable_params = params;
  CHECK(params_bitwise_equal(loaded.params, mutable_params));

  // save(load(x)) reproduces the bytes
  const auto path2 = dir / "test2.ckpt";
  model::save_checkpoint(path2, {loaded.config, loaded.stats, loaded.params});
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint shape mismatch is rejected") {
  auto c = small_config();
  const auto params = model::init_params(c);
  const auto dir = std::filesystem::temp_directory_path() / "mananet_ckpt_bad";
  std::filesystem::create_directories(dir);
  const auto path = dir / "bad.ckpt";
  model::save_checkpoint(path, {c, core::FeatureStats{}, params});

  // Corrupt the declared dimension so tensors no longer match the config.
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = content.find("d_v 4");
  REQUIRE(pos != std::string::npos);
  content.replace(pos, 5, "d_v 9");
  std::ofstream out(path);
  out << content;
  out.close();
  CHECK_THROWS_AS(model::load_checkpoint(path), IoError);
  std::filesystem::remove_all(dir);
}
