#include "sarl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace sarl {

namespace {

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
}

Index parse_index(const std::string& key, const std::string& v) {
  Index out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field real(T TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); },
          [m](const TrainConfig& c) { return num(c.*m); }};
}

Field integer(Index TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_index(k, v); },
          [m](const TrainConfig& c) { return std::to_string(c.*m); }};
}

Field flag(bool AblationFlags::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.ablation.*m = parse_bool(k, v); },
          [m](const TrainConfig& c) { return std::string(c.ablation.*m ? "1" : "0"); }};
}

// Insertion order is the serialization order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"lr", real(&TrainConfig::lr)},
      {"batch_size", integer(&TrainConfig::batch_size)},
      {"epochs", integer(&TrainConfig::epochs)},
      {"lambda1", real(&TrainConfig::lambda1)},
      {"lambda2", real(&TrainConfig::lambda2)},
      {"gamma_pos", real(&TrainConfig::gamma_pos)},
      {"gamma_neg", real(&TrainConfig::gamma_neg)},
      {"clip", real(&TrainConfig::clip)},
      {"pooling",
       {[](TrainConfig& c, const std::string&, const std::string& v) { c.pooling = parse_pooling(v); },
        [](const TrainConfig& c) { return pooling_name(c.pooling); }}},
      {"heads", integer(&TrainConfig::heads)},
      {"feature_dim", integer(&TrainConfig::feature_dim)},
      {"label_dim", integer(&TrainConfig::label_dim)},
      {"joint_dim", integer(&TrainConfig::joint_dim)},
      {"output_dim", integer(&TrainConfig::output_dim)},
      {"hidden_channels", integer(&TrainConfig::hidden_channels)},
      {"blocks", integer(&TrainConfig::blocks)},
      {"beta1", real(&TrainConfig::beta1)},
      {"beta2", real(&TrainConfig::beta2)},
      {"adam_eps", real(&TrainConfig::adam_eps)},
      {"weight_decay", real(&TrainConfig::weight_decay)},
      {"ema",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.ema = parse_bool(k, v); },
        [](const TrainConfig& c) { return std::string(c.ema ? "1" : "0"); }}},
      {"ema_decay", real(&TrainConfig::ema_decay)},
      {"seed",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_seed(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.seed); }}},
      {"disable_self_attention", flag(&AblationFlags::disable_self_attention)},
      {"disable_ot", flag(&AblationFlags::disable_transport)},
      {"disable_gsp_fusion", flag(&AblationFlags::disable_gsp_fusion)},
  };
  return table;
}

}  // namespace

std::string pooling_name(Pooling p) { return p == Pooling::avg ? "avg" : "max"; }

Pooling parse_pooling(const std::string& s) {
  if (s == "avg") return Pooling::avg;
  if (s == "max") return Pooling::max;
  throw ConfigError("pooling must be 'avg' or 'max', got '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("config: lr must be > 0");
  if (batch_size < 1 || epochs < 0) throw ConfigError("config: batch_size must be >= 1 and epochs >= 0");
  LossWeights{lambda1, lambda2}.validate();
  AslConfig{gamma_pos, gamma_neg, clip}.validate();
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("config: betas must lie in [0, 1)");
  if (!(adam_eps > 0) || weight_decay < 0) throw ConfigError("config: adam_eps must be > 0, weight_decay >= 0");
  if (!(ema_decay >= 0 && ema_decay <= 1)) throw ConfigError("config: ema_decay must lie in [0, 1]");
}

ModelConfig TrainConfig::model_config(const Dataset& data) const {
  ModelConfig m;
  if (data.kind == PayloadKind::image) {
    if (data.sample_shape.size() != 3) throw ConfigError("image dataset samples must be H x W x channels");
    m.encoder.mode = EncoderMode::tiny_conv;
    m.encoder.input_height = data.sample_shape[0];
    m.encoder.input_width = data.sample_shape[1];
    m.encoder.in_channels = data.sample_shape[2];
    m.encoder.feature_dim = feature_dim;
  } else {
    if (data.sample_shape.size() != 2) throw ConfigError("feature dataset samples must be P x d_v");
    // A precomputed grid is stored flat; treat it as one row of P patches.
    m.encoder.mode = EncoderMode::precomputed;
    m.encoder.input_height = 1;
    m.encoder.input_width = data.sample_shape[0];
    m.encoder.feature_dim = data.sample_shape[1];
  }
  m.encoder.blocks = blocks;
  m.encoder.hidden_channels = hidden_channels;
  m.classes = data.classes;
  m.label_dim = label_dim;
  m.heads = heads;
  m.joint_dim = joint_dim;
  m.output_dim = output_dim;
  m.pooling = pooling;
  m.ablation = ablation;
  m.validate();
  return m;
}

Objective TrainConfig::objective() const {
  // disable-ot trains on L_cls alone, so lambda2 is moot there.
  return {AslConfig{gamma_pos, gamma_neg, clip}, LossWeights{lambda1, ablation.disable_transport ? 0.0 : lambda2}};
}

TrainConfig preset(const std::string& name) {
  TrainConfig c;
  if (name == "voc") {
    c.lr = 9e-5;
    c.batch_size = 64;
    c.lambda1 = 0.04;
    c.lambda2 = 0.5;
  } else if (name == "coco") {
    c.lr = 5e-5;
    c.batch_size = 52;
    c.lambda1 = 0.2;
    c.lambda2 = 0.5;
  } else if (name != "default") {
    throw ConfigError("unknown preset '" + name + "' (expected default, voc or coco)");
  }
  return c;
}

void apply_key_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void apply_key_values(TrainConfig& cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply_key_value(cfg, k, v);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [name, field] : fields()) keys.push_back(name);
  return keys;
}

std::string to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(cfg) + "\n";
  return out;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  TrainConfig cfg;
  apply_key_values(cfg, parse_key_values(buf.str()));
  return cfg;
}

}  // namespace sarl
