#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mananet/aggregate.hpp"
#include "mananet/core.hpp"
#include "mananet/linalg.hpp"

namespace mananet::model {

enum class HeadKind { Shallow, Mlp };
enum class AggregatorKind { Mana, Cf, Senf, Sumf, Af, Faf, PriceOnly };

std::string to_string(HeadKind k);
std::string to_string(AggregatorKind k);
HeadKind head_kind_from_string(const std::string& s);
AggregatorKind aggregator_from_string(const std::string& s);

struct ModelConfig {
  int d_k = 4;
  int d_v = 8;
  int d_e = 8;
  int hidden_width = 64;
  int lookback = 1;
  double epsilon = 8.0;
  uint64_t seed = 42;
  HeadKind head = HeadKind::Mlp;
  AggregatorKind aggregator = AggregatorKind::Mana;
  /// Test/equivalence hook: freezes the value encoder at the identity-padded
  /// map v(s) = [s, 0...], making epsilon = 0 reproduce plain averaging.
  bool identity_value_hook = false;

  /// Width of the news representation entering m_d.
  int news_rep_dim() const;
  int head_input_dim() const { return lookback * (d_e + news_rep_dim()); }
  void validate() const;
};

/// All trainable tensors. The same struct doubles as a gradient accumulator.
struct ModelParams {
  Mat Wq, Wk, Wv, We, W1, W2;
  Vec bq, bk, bv, be, b1, b2;
  Vec no_news;  // representation of a day with zero news items
};

struct TensorRef {
  const char* name;
  std::vector<double>* data;
};

/// Fixed-order views over every tensor (including empty ones).
std::vector<TensorRef> tensor_refs(ModelParams& p);
/// True for tensors pinned by the identity-value hook.
bool is_frozen_tensor(const ModelConfig& config, const std::string& name);

size_t param_count(const ModelConfig& config);

/// Zero-valued parameters with shapes determined by config.
ModelParams make_zero_params(const ModelConfig& config);

/// Glorot-uniform weights, zero biases. Each tensor is drawn from its own
/// stream keyed by (seed, tensor name), so shared tensors match across
/// aggregator kinds with the same seed.
ModelParams init_params(const ModelConfig& config);

/// View of one day's model inputs.
struct DayView {
  const core::PriceFeatureVector* features = nullptr;
  const core::DailyNews* news = nullptr;
};

/// Lookback window of day views ending at `end_day` (oldest first).
/// Requires dataset.usable(end_day).
std::vector<DayView> window_days(const core::AlignedDataset& ds, int end_day, int lookback);

struct DayTrace {
  Vec p;  // price features
  const core::DailyNews* news = nullptr;
  Vec q;
  Vec keys;    // N_d x d_k, row-major; flat to keep the hot path allocation-free
  Vec values;  // N_d x d_v, row-major
  std::vector<double> scores;
  std::vector<double> weights;
  Vec rep;  // news representation entering m_d
  Vec e;
  bool used_no_news = false;
};

struct ForwardTrace {
  std::vector<DayTrace> days;  // oldest first
  Vec head_in;
  Vec z1, h;  // mlp preactivation / activation
  Vec logits;                  // index 1 = "increase"
  std::array<double, 2> probs{};
  double loss = 0.0;
  int label = -1;  // -1 when the trace was produced for prediction only
};

/// m_d = [e(p_d), rep_d] plus the attention bookkeeping for the day.
/// For an empty news day rep_d is the learned no-news vector and the
/// attention output carries empty score/weight lists.
std::pair<Vec, agg::AttentionOutput> forward_day(const ModelConfig& config,
                                                 const ModelParams& params,
                                                 const core::PriceFeatureVector& features,
                                                 const core::DailyNews& news);

/// Full forward pass over exactly `lookback` days. label = -1 skips the loss.
ForwardTrace forward_window(const ModelConfig& config, const ModelParams& params,
                            std::span<const DayView> days, int label);

/// Softmax cross-entropy, -log p(label). Shift-invariant in the logits.
double loss_from_logits(std::span<const double> logits, int label);
std::array<double, 2> softmax2(std::span<const double> logits);

/// Exact reverse-mode gradients accumulated into `grads` (shaped like the
/// params). Gradients flow through the aggregation softmax into the key,
/// query, and value encoders.
void backward(const ModelConfig& config, const ModelParams& params, const ForwardTrace& trace,
              ModelParams& grads);

struct BatchResult {
  double mean_loss = 0.0;
  ModelParams grad;
};

/// Mean loss and gradient over the windows ending at `end_days`. The two
/// variants are bit-identical: each window's contribution is computed
/// independently and reduced in index order.
BatchResult batch_gradient_serial(const ModelConfig& config, const ModelParams& params,
                                  const core::AlignedDataset& ds, std::span<const int> end_days);
BatchResult batch_gradient_parallel(const ModelConfig& config, const ModelParams& params,
                                    const core::AlignedDataset& ds, std::span<const int> end_days);

std::vector<int> predict_serial(const ModelConfig& config, const ModelParams& params,
                                const core::AlignedDataset& ds, std::span<const int> end_days);
std::vector<int> predict_parallel(const ModelConfig& config, const ModelParams& params,
                                  const core::AlignedDataset& ds, std::span<const int> end_days);

/// Mean loss over the windows without a backward pass.
double batch_loss(const ModelConfig& config, const ModelParams& params,
                  const core::AlignedDataset& ds, std::span<const int> end_days);

/// Max relative disagreement between analytic gradients and central finite
/// differences over every trainable parameter, on the batch loss.
double grad_check(const ModelConfig& config, const ModelParams& params,
                  const core::AlignedDataset& ds, std::span<const int> end_days,
                  double step = 1e-5);

}  // namespace mananet::model
