#ifndef SARL_CONFIG_HPP_
#define SARL_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sarl/data.hpp"
#include "sarl/head.hpp"

namespace sarl {

struct TrainConfig {
  double lr = 3e-3;
  Index batch_size = 16;
  Index epochs = 30;
  double lambda1 = 0.04;
  double lambda2 = 0.5;
  double gamma_pos = 0.0;
  double gamma_neg = 2.0;
  double clip = 0.05;
  Pooling pooling = Pooling::avg;
  Index heads = 8;
  Index feature_dim = 32;  // d_v
  Index label_dim = 16;    // d_t
  Index joint_dim = 16;    // d_1
  Index output_dim = 16;   // d_2
  Index hidden_channels = 16;
  Index blocks = 2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
  bool ema = true;
  double ema_decay = 0.9997;
  std::uint64_t seed = 0;
  AblationFlags ablation;

  void validate() const;

  /// Model for a dataset; C, the input grid and channels come from the data.
  ModelConfig model_config(const Dataset& data) const;
  Objective objective() const;
};

/// Full-dataset presets: "voc" and "coco" (lr, batch size, lambda1, lambda2).
TrainConfig preset(const std::string& name);

/// Applies every key in `kv` on top of `cfg`; unknown keys are errors.
void apply_key_values(TrainConfig& cfg, const KeyValues& kv);
void apply_key_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Recognized keys in serialization order.
std::vector<std::string> config_keys();

/// Every key, one per line, in a fixed order; parses back to the same config.
std::string to_text(const TrainConfig& cfg);

TrainConfig load_config(const std::string& path);

std::string pooling_name(Pooling p);
Pooling parse_pooling(const std::string& s);

}  // namespace sarl

#endif  // SARL_CONFIG_HPP_
