#include "mananet/checkpoint.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mananet/errors.hpp"

namespace mananet::model {

namespace {

constexpr const char* kMagic = "mananet-checkpoint v1";

std::string hexd(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", x);
  return buf;
}

double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw IoError("checkpoint: malformed number '" + tok + "'");
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  const ModelConfig& c = ckpt.config;
  out << kMagic << "\n";
  out << "d_k " << c.d_k << "\n";
  out << "d_v " << c.d_v << "\n";
  out << "d_e " << c.d_e << "\n";
  out << "hidden_width " << c.hidden_width << "\n";
  out << "lookback " << c.lookback << "\n";
  out << "epsilon " << hexd(c.epsilon) << "\n";
  out << "seed " << c.seed << "\n";
  out << "head " << to_string(c.head) << "\n";
  out << "aggregator " << to_string(c.aggregator) << "\n";
  out << "identity_value_hook " << (c.identity_value_hook ? 1 : 0) << "\n";
  const core::FeatureStats& s = ckpt.stats;
  out << "stats " << hexd(s.log_volume_mean) << " " << hexd(s.log_volume_std) << " "
      << hexd(s.close_mean) << " " << hexd(s.close_std) << " " << (s.log_volume_zero_var ? 1 : 0)
      << " " << (s.close_zero_var ? 1 : 0) << "\n";

  ModelParams params = ckpt.params;  // tensor_refs needs mutable access
  for (const auto& t : tensor_refs(params)) {
    out << "tensor " << t.name << " " << t.data->size() << "\n";
    for (size_t i = 0; i < t.data->size(); ++i) {
      out << hexd((*t.data)[i]) << ((i + 1) % 8 == 0 || i + 1 == t.data->size() ? "\n" : " ");
    }
  }
  out << "end\n";
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError("not a mananet checkpoint: " + path.string());
  }

  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  std::string key;
  while (in >> key) {
    if (key == "d_k") in >> c.d_k;
    else if (key == "d_v") in >> c.d_v;
    else if (key == "d_e") in >> c.d_e;
    else if (key == "hidden_width") in >> c.hidden_width;
    else if (key == "lookback") in >> c.lookback;
    else if (key == "epsilon") {
      std::string tok;
      in >> tok;
      c.epsilon = parse_double(tok);
    } else if (key == "seed") {
      in >> c.seed;
    } else if (key == "head") {
      std::string tok;
      in >> tok;
      c.head = head_kind_from_string(tok);
    } else if (key == "aggregator") {
      std::string tok;
      in >> tok;
      c.aggregator = aggregator_from_string(tok);
    } else if (key == "identity_value_hook") {
      int v;
      in >> v;
      c.identity_value_hook = v != 0;
    } else if (key == "stats") {
      std::string a, b, d, e;
      int f, g;
      in >> a >> b >> d >> e >> f >> g;
      ckpt.stats.log_volume_mean = parse_double(a);
      ckpt.stats.log_volume_std = parse_double(b);
      ckpt.stats.close_mean = parse_double(d);
      ckpt.stats.close_std = parse_double(e);
      ckpt.stats.log_volume_zero_var = f != 0;
      ckpt.stats.close_zero_var = g != 0;
    } else if (key == "tensor") {
      break;
    } else if (key == "end") {
      throw IoError("checkpoint missing tensors: " + path.string());
    } else {
      throw IoError("checkpoint: unknown key '" + key + "'");
    }
  }

  ckpt.params = make_zero_params(c);
  auto refs = tensor_refs(ckpt.params);
  // `key` currently holds "tensor" from the loop above.
  while (key == "tensor") {
    std::string name;
    size_t count = 0;
    in >> name >> count;
    auto it = std::find_if(refs.begin(), refs.end(),
                           [&](const TensorRef& r) { return name == r.name; });
    if (it == refs.end()) throw IoError("checkpoint: unknown tensor '" + name + "'");
    if (it->data->size() != count) {
      throw IoError("checkpoint: tensor '" + name + "' has size " + std::to_string(count) +
                    ", config implies " + std::to_string(it->data->size()));
    }
    for (size_t i = 0; i < count; ++i) {
      std::string tok;
      if (!(in >> tok)) throw IoError("checkpoint: truncated tensor '" + name + "'");
      (*it->data)[i] = parse_double(tok);
    }
    if (!(in >> key)) throw IoError("checkpoint: missing end marker");
  }
  if (key != "end") throw IoError("checkpoint: expected 'end', got '" + key + "'");
  return ckpt;
}

}  // namespace mananet::model
