#include "mananet/runconfig.hpp"

#include <cstdlib>
#include <fstream>

#include "mananet/errors.hpp"

namespace mananet::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double_token(const std::string& key, const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw ValidationError("config key '" + key + "': malformed number '" + tok + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  KeyValueFile kv;
  kv.path_ = path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    }
    if (kv.values_.count(key)) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": duplicate key '" +
                            key + "'");
    }
    kv.values_[key] = value;
    kv.consumed_[key] = false;
  }
  return kv;
}

bool KeyValueFile::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueFile::get_string(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ValidationError(path_.string() + ": missing required key '" + key + "'");
  }
  consumed_[key] = true;
  return it->second;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) {
  if (!has(key)) return fallback;
  return get_string(key);
}

double KeyValueFile::get_double(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  return parse_double_token(key, get_string(key));
}

int KeyValueFile::get_int(const std::string& key, int fallback) {
  if (!has(key)) return fallback;
  const double v = parse_double_token(key, get_string(key));
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw ValidationError("config key '" + key + "': expected integer");
  }
  return i;
}

uint64_t KeyValueFile::get_uint64(const std::string& key, uint64_t fallback) {
  if (!has(key)) return fallback;
  const std::string tok = get_string(key);
  char* end = nullptr;
  const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0') {
    throw ValidationError("config key '" + key + "': malformed unsigned integer '" + tok + "'");
  }
  return static_cast<uint64_t>(v);
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<double> KeyValueFile::get_double_list(const std::string& key,
                                                  std::vector<double> fallback) {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& tok : split_list(get_string(key))) out.push_back(parse_double_token(key, tok));
  return out;
}

std::vector<int> KeyValueFile::get_int_list(const std::string& key, std::vector<int> fallback) {
  if (!has(key)) return fallback;
  std::vector<int> out;
  for (const auto& tok : split_list(get_string(key))) {
    const double v = parse_double_token(key, tok);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) {
      throw ValidationError("config key '" + key + "': expected integer list");
    }
    out.push_back(i);
  }
  return out;
}

void KeyValueFile::require_consumed() const {
  std::string unknown;
  for (const auto& [key, used] : consumed_) {
    if (!used) unknown += unknown.empty() ? key : ", " + key;
  }
  if (!unknown.empty()) {
    throw ValidationError(path_.string() + ": unknown key(s): " + unknown);
  }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  KeyValueFile kv = KeyValueFile::parse(path);
  RunConfig c;
  c.prices_path = kv.get_string("prices", "");
  c.news_path = kv.get_string("news", "");
  c.out_dir = kv.get_string("out", c.out_dir);
  c.seed = kv.get_uint64("seed", c.seed);

  c.model.d_k = kv.get_int("d_k", c.model.d_k);
  c.model.d_v = kv.get_int("d_v", c.model.d_v);
  c.model.d_e = kv.get_int("d_e", c.model.d_e);
  c.model.hidden_width = kv.get_int("hidden_width", c.model.hidden_width);
  c.model.lookback = kv.get_int("t", c.model.lookback);
  c.model.epsilon = kv.get_double("epsilon", c.model.epsilon);
  c.model.head = model::head_kind_from_string(kv.get_string("head", to_string(c.model.head)));
  c.model.aggregator =
      model::aggregator_from_string(kv.get_string("aggregator", to_string(c.model.aggregator)));
  c.model.identity_value_hook = kv.get_bool("identity_value_hook", false);

  c.train.learning_rate = kv.get_double("learning_rate", c.train.learning_rate);
  c.train.momentum = kv.get_double("momentum", c.train.momentum);
  c.train.clip_norm = kv.get_double("clip_norm", c.train.clip_norm);
  c.train.epochs = kv.get_int("epochs", c.train.epochs);
  c.train.batch_size = kv.get_int("batch_size", c.train.batch_size);
  c.train.patience = kv.get_int("patience", c.train.patience);

  c.epsilon_grid = kv.get_double_list("epsilon_grid", c.epsilon_grid);
  c.t_grid = kv.get_int_list("t_grid", c.t_grid);
  c.pnl_mode = eval::pnl_mode_from_string(kv.get_string("pnl_mode", to_string(c.pnl_mode)));
  c.r_f = kv.get_double("r_f", c.r_f);
  c.max_windows = kv.get_int("max_windows", c.max_windows);
  c.log_timing = kv.get_bool("log_timing", false);
  kv.require_consumed();

  if (const char* env_seed = std::getenv("MANANET_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env_seed, &end, 10);
    if (end == env_seed || *end != '\0') {
      throw ValidationError("MANANET_SEED: malformed unsigned integer");
    }
    c.seed = static_cast<uint64_t>(v);
  }
  c.model.seed = c.seed;
  c.train.seed = c.seed;
  return c;
}

}  // namespace mananet::cli
