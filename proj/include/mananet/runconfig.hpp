#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mananet/eval.hpp"
#include "mananet/model.hpp"
#include "mananet/train.hpp"

namespace mananet::cli {

/// Flat `key = value` file with '#' comments. Every key must be consumed by
/// a typed getter; leftovers are hard errors (strict configs).
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  uint64_t get_uint64(const std::string& key, uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback);
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback);

  /// Throws ValidationError naming every key no getter asked for.
  void require_consumed() const;

 private:
  std::filesystem::path path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> consumed_;
};

/// Declarative run configuration for train/backtest. Every field except the
/// input paths has a default. MANANET_SEED in the environment overrides the
/// seed.
struct RunConfig {
  std::string prices_path;
  std::string news_path;
  std::string out_dir = "out";
  uint64_t seed = 42;

  model::ModelConfig model;
  train::TrainConfig train;
  std::vector<double> epsilon_grid{1, 2, 4, 8, 16};
  std::vector<int> t_grid{1, 3, 5, 10, 20};

  eval::PnlMode pnl_mode = eval::PnlMode::AsWritten;
  double r_f = 0.02;
  int max_windows = 10;
  bool log_timing = false;

  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace mananet::cli
