#include "mananet/model.hpp"

#include <algorithm>
#include <cmath>

#include "mananet/errors.hpp"
#include "mananet/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mananet::model {

std::string to_string(HeadKind k) { return k == HeadKind::Shallow ? "shallow" : "mlp"; }

std::string to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::Mana: return "mana";
    case AggregatorKind::Cf: return "cf";
    case AggregatorKind::Senf: return "senf";
    case AggregatorKind::Sumf: return "sumf";
    case AggregatorKind::Af: return "af";
    case AggregatorKind::Faf: return "faf";
    case AggregatorKind::PriceOnly: return "price-only";
  }
  return "mana";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "shallow") return HeadKind::Shallow;
  if (s == "mlp") return HeadKind::Mlp;
  throw ValidationError("unknown head kind '" + s + "' (expected shallow|mlp)");
}

AggregatorKind aggregator_from_string(const std::string& s) {
  if (s == "mana") return AggregatorKind::Mana;
  if (s == "cf") return AggregatorKind::Cf;
  if (s == "senf") return AggregatorKind::Senf;
  if (s == "sumf") return AggregatorKind::Sumf;
  if (s == "af") return AggregatorKind::Af;
  if (s == "faf") return AggregatorKind::Faf;
  if (s == "price-only") return AggregatorKind::PriceOnly;
  throw ValidationError("unknown aggregator '" + s + "'");
}

int ModelConfig::news_rep_dim() const {
  switch (aggregator) {
    case AggregatorKind::Mana: return d_v;
    case AggregatorKind::Senf: return 1;
    case AggregatorKind::PriceOnly: return 0;
    default: return 3;
  }
}

void ModelConfig::validate() const {
  if (d_k < 1 || d_v < 1 || d_e < 1 || hidden_width < 1) {
    throw ValidationError("model dims must be >= 1");
  }
  if (lookback < 1) throw ValidationError("lookback must be >= 1");
  if (identity_value_hook) {
    if (aggregator != AggregatorKind::Mana) {
      throw ValidationError("identity_value_hook applies to the mana aggregator only");
    }
    if (d_v < 3) throw ValidationError("identity_value_hook needs d_v >= 3");
    if (epsilon < 0) throw ValidationError("epsilon must be >= 0");
  } else if (epsilon < 1.0) {
    throw ValidationError("epsilon must be >= 1 (0 is admitted only with the identity hook)");
  }
}

std::vector<TensorRef> tensor_refs(ModelParams& p) {
  return {
      {"wq", &p.Wq.a}, {"bq", &p.bq}, {"wk", &p.Wk.a}, {"bk", &p.bk},
      {"wv", &p.Wv.a}, {"bv", &p.bv}, {"we", &p.We.a}, {"be", &p.be},
      {"w1", &p.W1.a}, {"b1", &p.b1}, {"w2", &p.W2.a}, {"b2", &p.b2},
      {"no_news", &p.no_news},
  };
}

bool is_frozen_tensor(const ModelConfig& config, const std::string& name) {
  return config.identity_value_hook && (name == "wv" || name == "bv");
}

size_t param_count(const ModelConfig& config) {
  ModelParams p = make_zero_params(config);
  size_t n = 0;
  for (const auto& t : tensor_refs(p)) n += t.data->size();
  return n;
}

ModelParams make_zero_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  if (config.aggregator == AggregatorKind::Mana) {
    p.Wq = Mat(config.d_k, core::kPriceFeatureDim);
    p.bq = Vec(config.d_k, 0.0);
    p.Wk = Mat(config.d_k, 3);
    p.bk = Vec(config.d_k, 0.0);
    p.Wv = Mat(config.d_v, 3);
    p.bv = Vec(config.d_v, 0.0);
  }
  p.We = Mat(config.d_e, core::kPriceFeatureDim);
  p.be = Vec(config.d_e, 0.0);
  const int in = config.head_input_dim();
  if (config.head == HeadKind::Mlp) {
    p.W1 = Mat(config.hidden_width, in);
    p.b1 = Vec(config.hidden_width, 0.0);
    p.W2 = Mat(2, config.hidden_width);
  } else {
    p.W2 = Mat(2, in);
  }
  p.b2 = Vec(2, 0.0);
  p.no_news = Vec(config.news_rep_dim(), 0.0);
  return p;
}

namespace {

void glorot_fill(Mat& m, Rng& rng) {
  if (m.size() == 0) return;
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
  for (double& x : m.a) x = rng.uniform(-limit, limit);
}

void set_identity_padded(Mat& wv, Vec& bv) {
  std::fill(wv.a.begin(), wv.a.end(), 0.0);
  for (int i = 0; i < std::min(wv.rows, 3); ++i) wv(i, i) = 1.0;
  std::fill(bv.begin(), bv.end(), 0.0);
}

}  // namespace

ModelParams init_params(const ModelConfig& config) {
  ModelParams p = make_zero_params(config);
  auto draw = [&](const char* name, Mat& m) {
    Rng rng = Rng::stream(config.seed, stable_hash(name));
    glorot_fill(m, rng);
  };
  draw("wq", p.Wq);
  draw("wk", p.Wk);
  draw("wv", p.Wv);
  draw("we", p.We);
  draw("w1", p.W1);
  draw("w2", p.W2);
  if (config.identity_value_hook) set_identity_padded(p.Wv, p.bv);
  return p;
}

std::vector<DayView> window_days(const core::AlignedDataset& ds, int end_day, int lookback) {
  if (end_day >= ds.num_days() || end_day < lookback) {
    throw ValidationError("window_days: day " + std::to_string(end_day) +
                          " is not usable with lookback " + std::to_string(lookback));
  }
  std::vector<DayView> days;
  days.reserve(static_cast<size_t>(lookback));
  for (int i = end_day - lookback + 1; i <= end_day; ++i) {
    const auto& r = ds.records[i];
    if (!r.features) throw ValidationError("window_days: day without features");
    days.push_back(DayView{&*r.features, &r.news});
  }
  return days;
}

namespace {

Vec static_rep(AggregatorKind kind, const core::DailyNews& news) {
  switch (kind) {
    case AggregatorKind::Cf: {
      auto a = agg::aggregate_cf(news);
      return Vec{a[0], a[1], a[2]};
    }
    case AggregatorKind::Senf: return Vec{agg::aggregate_senf(news).value};
    case AggregatorKind::Sumf: {
      auto a = agg::aggregate_sumf(news);
      return Vec{a[0], a[1], a[2]};
    }
    case AggregatorKind::Af: {
      auto a = agg::aggregate_af(news);
      return Vec{a[0], a[1], a[2]};
    }
    case AggregatorKind::Faf: {
      auto a = agg::aggregate_faf(news);
      return Vec{a[0], a[1], a[2]};
    }
    default: throw ValidationError("static_rep: not a static aggregator");
  }
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void day_forward(const ModelConfig& config, const ModelParams& params,
                 const core::PriceFeatureVector& features, const core::DailyNews& news,
                 DayTrace& d) {
  d.p.assign(features.begin(), features.end());
  for (double x : d.p) {
    if (!std::isfinite(x)) throw ValidationError("forward: non-finite price feature");
  }
  d.news = &news;
  d.e = affine(params.We, params.be, d.p);

  const int n = news.count();
  if (config.aggregator == AggregatorKind::PriceOnly) {
    d.rep.clear();
    return;
  }
  if (n == 0) {
    d.rep = params.no_news;
    d.used_no_news = true;
    return;
  }
  if (config.aggregator != AggregatorKind::Mana) {
    d.rep = static_rep(config.aggregator, news);
    return;
  }

  const int d_k = config.d_k;
  const int d_v = config.d_v;
  d.q = affine(params.Wq, params.bq, d.p);
  d.keys.resize(static_cast<size_t>(n) * d_k);
  d.values.resize(static_cast<size_t>(n) * d_v);
  d.scores.resize(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
  for (int i = 0; i < n; ++i) {
    const auto& s = news.items[i].sentiment;
    const double triple[3] = {s.pos, s.neu, s.neg};
    const std::span<const double> sv(triple, 3);
    const std::span<double> key(&d.keys[static_cast<size_t>(i) * d_k], d_k);
    affine(params.Wk, params.bk, sv, key);
    affine(params.Wv, params.bv, sv,
           std::span<double>(&d.values[static_cast<size_t>(i) * d_v], d_v));
    d.scores[i] = dot(d.q, key) * scale;  // agg::attention_scores, fused per row
  }
  d.weights = agg::aggregation_weights(d.scores, config.epsilon);
  d.rep.assign(d_v, 0.0);
  for (int i = 0; i < n; ++i) {
    axpy(d.weights[i], std::span<const double>(&d.values[static_cast<size_t>(i) * d_v], d_v),
         d.rep);
  }
}

}  // namespace

std::pair<Vec, agg::AttentionOutput> forward_day(const ModelConfig& config,
                                                 const ModelParams& params,
                                                 const core::PriceFeatureVector& features,
                                                 const core::DailyNews& news) {
  DayTrace d;
  day_forward(config, params, features, news, d);
  Vec m;
  m.reserve(d.e.size() + d.rep.size());
  m.insert(m.end(), d.e.begin(), d.e.end());
  m.insert(m.end(), d.rep.begin(), d.rep.end());
  agg::AttentionOutput out;
  out.scores = std::move(d.scores);
  out.weights = std::move(d.weights);
  out.attf = std::move(d.rep);
  return {std::move(m), std::move(out)};
}

double loss_from_logits(std::span<const double> logits, int label) {
  if (label != 0 && label != 1) throw ValidationError("loss: label must be 0 or 1");
  const double m = std::max(logits[0], logits[1]);
  const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
  return lse - logits[label];
}

std::array<double, 2> softmax2(std::span<const double> logits) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

ForwardTrace forward_window(const ModelConfig& config, const ModelParams& params,
                            std::span<const DayView> days, int label) {
  if (static_cast<int>(days.size()) != config.lookback) {
    throw ValidationError("forward_window: expected " + std::to_string(config.lookback) +
                          " days, got " + std::to_string(days.size()));
  }
  ForwardTrace t;
  t.days.resize(days.size());
  const int m_dim = config.d_e + config.news_rep_dim();
  t.head_in.resize(static_cast<size_t>(config.head_input_dim()));
  for (size_t j = 0; j < days.size(); ++j) {
    day_forward(config, params, *days[j].features, *days[j].news, t.days[j]);
    double* dst = &t.head_in[j * static_cast<size_t>(m_dim)];
    std::copy(t.days[j].e.begin(), t.days[j].e.end(), dst);
    std::copy(t.days[j].rep.begin(), t.days[j].rep.end(), dst + config.d_e);
  }

  if (config.head == HeadKind::Mlp) {
    t.z1 = affine(params.W1, params.b1, t.head_in);
    t.h.resize(t.z1.size());
    for (size_t i = 0; i < t.z1.size(); ++i) t.h[i] = softplus(t.z1[i]);
    t.logits = affine(params.W2, params.b2, t.h);
  } else {
    t.logits = affine(params.W2, params.b2, t.head_in);
  }
  t.probs = softmax2(t.logits);
  t.label = label;
  if (label >= 0) t.loss = loss_from_logits(t.logits, label);
  return t;
}

void backward(const ModelConfig& config, const ModelParams& params, const ForwardTrace& trace,
              ModelParams& grads) {
  if (trace.label < 0) throw ValidationError("backward: trace has no label");
  const int m_dim = config.d_e + config.news_rep_dim();
  const double inv_sqrt_dk = config.aggregator == AggregatorKind::Mana
                                 ? 1.0 / std::sqrt(static_cast<double>(config.d_k))
                                 : 0.0;

  Vec dlogits{trace.probs[0], trace.probs[1]};
  dlogits[trace.label] -= 1.0;

  Vec dx(trace.head_in.size(), 0.0);
  if (config.head == HeadKind::Mlp) {
    add_outer(grads.W2, dlogits, trace.h);
    axpy(1.0, dlogits, grads.b2);
    Vec dh(trace.h.size(), 0.0);
    add_transpose_mul(params.W2, dlogits, dh);
    Vec dz1(dh.size());
    for (size_t i = 0; i < dh.size(); ++i) dz1[i] = dh[i] * sigmoid(trace.z1[i]);
    add_outer(grads.W1, dz1, trace.head_in);
    axpy(1.0, dz1, grads.b1);
    add_transpose_mul(params.W1, dz1, dx);
  } else {
    add_outer(grads.W2, dlogits, trace.head_in);
    axpy(1.0, dlogits, grads.b2);
    add_transpose_mul(params.W2, dlogits, dx);
  }

  for (size_t j = 0; j < trace.days.size(); ++j) {
    const DayTrace& d = trace.days[j];
    const std::span<const double> dm(&dx[j * static_cast<size_t>(m_dim)],
                                     static_cast<size_t>(m_dim));
    const std::span<const double> de = dm.first(static_cast<size_t>(config.d_e));
    const std::span<const double> drep = dm.subspan(static_cast<size_t>(config.d_e));

    add_outer(grads.We, de, d.p);
    axpy(1.0, de, grads.be);

    if (drep.empty()) continue;
    if (d.used_no_news) {
      axpy(1.0, drep, grads.no_news);
      continue;
    }
    if (config.aggregator != AggregatorKind::Mana) continue;  // static rep, no gradient

    const size_t n = d.weights.size();
    const size_t d_k = d.q.size();
    const size_t d_v = drep.size();
    // rep = sum_i w_i v_i with w = softmax(eps * a).
    std::vector<double> dw(n);
    double weighted_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      dw[i] = dot(drep, std::span<const double>(&d.values[i * d_v], d_v));
      weighted_sum += d.weights[i] * dw[i];
    }
    Vec dq(d_k, 0.0);
    Vec dk(d_k);
    Vec dv(d_v);
    for (size_t i = 0; i < n; ++i) {
      const auto& s = d.news->items[i].sentiment;
      const double triple[3] = {s.pos, s.neu, s.neg};
      const std::span<const double> sv(triple, 3);
      if (!config.identity_value_hook) {
        for (size_t r = 0; r < d_v; ++r) dv[r] = d.weights[i] * drep[r];
        add_outer(grads.Wv, dv, sv);
        axpy(1.0, dv, grads.bv);
      }
      const double da = config.epsilon * d.weights[i] * (dw[i] - weighted_sum);
      axpy(da * inv_sqrt_dk, std::span<const double>(&d.keys[i * d_k], d_k), dq);
      for (size_t r = 0; r < d_k; ++r) dk[r] = da * inv_sqrt_dk * d.q[r];
      add_outer(grads.Wk, dk, sv);
      axpy(1.0, dk, grads.bk);
    }
    add_outer(grads.Wq, dq, d.p);
    axpy(1.0, dq, grads.bq);
  }
}

namespace {

int window_label(const core::AlignedDataset& ds, int end_day) {
  const auto& label = ds.records[end_day].label;
  if (!label) throw ValidationError("window at day " + std::to_string(end_day) + " has no label");
  return *label;
}

void accumulate(ModelParams& acc, ModelParams& delta) {
  auto a = tensor_refs(acc);
  auto d = tensor_refs(delta);
  for (size_t t = 0; t < a.size(); ++t) {
    for (size_t i = 0; i < a[t].data->size(); ++i) (*a[t].data)[i] += (*d[t].data)[i];
  }
}

void scale_params(ModelParams& p, double factor) {
  for (auto& t : tensor_refs(p)) {
    for (double& x : *t.data) x *= factor;
  }
}

// The batch reduction runs over a fixed number of index blocks. Each block
// left-folds its windows into a block-local accumulator; block results are
// folded in block order. Serial and parallel variants share this structure,
// so their results are bit-identical for any thread count or schedule.
constexpr int kReduceBlocks = 8;

void block_gradient(const ModelConfig& config, const ModelParams& params,
                    const core::AlignedDataset& ds, std::span<const int> end_days,
                    double& loss_sum, ModelParams& acc) {
  for (int end : end_days) {
    const auto days = window_days(ds, end, config.lookback);
    const ForwardTrace trace = forward_window(config, params, days, window_label(ds, end));
    loss_sum += trace.loss;
    backward(config, params, trace, acc);
  }
}

BatchResult fold_blocks(const ModelConfig& config, std::span<double> block_losses,
                        std::vector<ModelParams>& block_grads, size_t batch_size) {
  BatchResult out;
  out.grad = make_zero_params(config);
  double loss_sum = 0.0;
  for (size_t b = 0; b < block_grads.size(); ++b) {
    loss_sum += block_losses[b];
    accumulate(out.grad, block_grads[b]);
  }
  const double inv = 1.0 / static_cast<double>(batch_size);
  out.mean_loss = loss_sum * inv;
  scale_params(out.grad, inv);
  return out;
}

}  // namespace

BatchResult batch_gradient_serial(const ModelConfig& config, const ModelParams& params,
                                  const core::AlignedDataset& ds, std::span<const int> end_days) {
  if (end_days.empty()) throw ValidationError("batch_gradient: empty batch");
  const int n = static_cast<int>(end_days.size());
  const int blocks = std::min(kReduceBlocks, n);
  std::vector<ModelParams> block_grads(blocks);
  std::vector<double> block_losses(blocks, 0.0);
  for (int b = 0; b < blocks; ++b) {
    block_grads[b] = make_zero_params(config);
    const size_t lo = static_cast<size_t>(b) * n / blocks;
    const size_t hi = static_cast<size_t>(b + 1) * n / blocks;
    block_gradient(config, params, ds, end_days.subspan(lo, hi - lo), block_losses[b],
                   block_grads[b]);
  }
  return fold_blocks(config, block_losses, block_grads, end_days.size());
}

BatchResult batch_gradient_parallel(const ModelConfig& config, const ModelParams& params,
                                    const core::AlignedDataset& ds,
                                    std::span<const int> end_days) {
  if (end_days.empty()) throw ValidationError("batch_gradient: empty batch");
  const int n = static_cast<int>(end_days.size());
  const int blocks = std::min(kReduceBlocks, n);
  std::vector<ModelParams> block_grads(blocks);
  std::vector<double> block_losses(blocks, 0.0);
  std::vector<std::exception_ptr> errors(blocks);

  // Exceptions may not escape the parallel region; capture per block and
  // rethrow the lowest-index one so the error is schedule-independent too.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (int b = 0; b < blocks; ++b) {
    try {
      block_grads[b] = make_zero_params(config);
      const size_t lo = static_cast<size_t>(b) * n / blocks;
      const size_t hi = static_cast<size_t>(b + 1) * n / blocks;
      block_gradient(config, params, ds, end_days.subspan(lo, hi - lo), block_losses[b],
                     block_grads[b]);
    } catch (...) {
      errors[b] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return fold_blocks(config, block_losses, block_grads, end_days.size());
}

std::vector<int> predict_serial(const ModelConfig& config, const ModelParams& params,
                                const core::AlignedDataset& ds, std::span<const int> end_days) {
  std::vector<int> preds(end_days.size());
  for (size_t i = 0; i < end_days.size(); ++i) {
    const auto days = window_days(ds, end_days[i], config.lookback);
    const ForwardTrace t = forward_window(config, params, days, -1);
    preds[i] = t.logits[1] > t.logits[0] ? 1 : 0;
  }
  return preds;
}

std::vector<int> predict_parallel(const ModelConfig& config, const ModelParams& params,
                                  const core::AlignedDataset& ds, std::span<const int> end_days) {
  std::vector<int> preds(end_days.size());
  const int n = static_cast<int>(end_days.size());
  std::vector<std::exception_ptr> errors(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      const auto days = window_days(ds, end_days[i], config.lookback);
      const ForwardTrace t = forward_window(config, params, days, -1);
      preds[i] = t.logits[1] > t.logits[0] ? 1 : 0;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return preds;
}

double batch_loss(const ModelConfig& config, const ModelParams& params,
                  const core::AlignedDataset& ds, std::span<const int> end_days) {
  if (end_days.empty()) throw ValidationError("batch_loss: empty batch");
  double sum = 0.0;
  for (int end : end_days) {
    const auto days = window_days(ds, end, config.lookback);
    sum += forward_window(config, params, days, window_label(ds, end)).loss;
  }
  return sum / static_cast<double>(end_days.size());
}

double grad_check(const ModelConfig& config, const ModelParams& params,
                  const core::AlignedDataset& ds, std::span<const int> end_days, double step) {
  const BatchResult analytic = batch_gradient_serial(config, params, ds, end_days);

  ModelParams probe = params;
  auto probe_refs = tensor_refs(probe);
  ModelParams analytic_grad = analytic.grad;
  auto grad_refs = tensor_refs(analytic_grad);

  double max_err = 0.0;
  for (size_t t = 0; t < probe_refs.size(); ++t) {
    if (is_frozen_tensor(config, probe_refs[t].name)) continue;
    auto& data = *probe_refs[t].data;
    for (size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double plus = batch_loss(config, probe, ds, end_days);
      data[i] = saved - step;
      const double minus = batch_loss(config, probe, ds, end_days);
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = (*grad_refs[t].data)[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace mananet::model
