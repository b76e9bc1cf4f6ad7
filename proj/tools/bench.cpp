// Serial vs OpenMP timing for the batch gradient and prediction kernels.
// The parallel variants are required to be bit-identical to the serial
// reference; this target reports the speedup and verifies the equality.

#include <chrono>
#include <cstdio>
#include <vector>

#include "mananet/core.hpp"
#include "mananet/data.hpp"
#include "mananet/model.hpp"
#include "mananet/train.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mananet;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool params_equal(model::ModelParams& a, model::ModelParams& b) {
  auto ra = model::tensor_refs(a);
  auto rb = model::tensor_refs(b);
  for (size_t t = 0; t < ra.size(); ++t) {
    if (*ra[t].data != *rb[t].data) return false;
  }
  return true;
}

}  // namespace

int main() {
  data::PlantedSignalSpec spec;
  spec.num_days = 600;
  spec.noise_news_per_day = 120;
  spec.seed = 1234;
  const auto corpus = data::gen_planted_signal_corpus(spec);

  model::ModelConfig config;
  config.lookback = 5;
  config.epsilon = 8.0;
  config.seed = 99;

  const auto stats =
      core::fit_feature_stats(corpus.bars, {0, static_cast<int>(corpus.bars.size())});
  const auto ds = core::align(corpus.bars, corpus.news, config.lookback, stats);
  const auto params = model::init_params(config);

  std::vector<int> batch;
  for (int d = config.lookback; d < ds.num_days() - 1; ++d) batch.push_back(d);

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("batch: %zu windows, lookback %d, %d news/day\n", batch.size(), config.lookback,
              spec.noise_news_per_day + 1);

  constexpr int kReps = 5;
  auto t0 = std::chrono::steady_clock::now();
  model::BatchResult serial;
  for (int r = 0; r < kReps; ++r) serial = model::batch_gradient_serial(config, params, ds, batch);
  const double serial_s = seconds_since(t0) / kReps;

  t0 = std::chrono::steady_clock::now();
  model::BatchResult parallel;
  for (int r = 0; r < kReps; ++r) {
    parallel = model::batch_gradient_parallel(config, params, ds, batch);
  }
  const double parallel_s = seconds_since(t0) / kReps;

  std::printf("batch_gradient   serial %8.2f ms   parallel %8.2f ms   speedup %.2fx\n",
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
  if (serial.mean_loss != parallel.mean_loss || !params_equal(serial.grad, parallel.grad)) {
    std::printf("MISMATCH: parallel gradient differs from serial reference\n");
    return 1;
  }

  t0 = std::chrono::steady_clock::now();
  std::vector<int> preds_serial;
  for (int r = 0; r < kReps; ++r) preds_serial = model::predict_serial(config, params, ds, batch);
  const double pred_serial_s = seconds_since(t0) / kReps;

  t0 = std::chrono::steady_clock::now();
  std::vector<int> preds_parallel;
  for (int r = 0; r < kReps; ++r) {
    preds_parallel = model::predict_parallel(config, params, ds, batch);
  }
  const double pred_parallel_s = seconds_since(t0) / kReps;

  std::printf("predict          serial %8.2f ms   parallel %8.2f ms   speedup %.2fx\n",
              pred_serial_s * 1e3, pred_parallel_s * 1e3, pred_serial_s / pred_parallel_s);
  if (preds_serial != preds_parallel) {
    std::printf("MISMATCH: parallel predictions differ from serial reference\n");
    return 1;
  }

  std::printf("parallel kernels match the serial reference bit-for-bit\n");
  return 0;
}
