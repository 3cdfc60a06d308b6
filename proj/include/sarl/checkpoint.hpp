#ifndef SARL_CHECKPOINT_HPP_
#define SARL_CHECKPOINT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sarl/config.hpp"
#include "sarl/parameters.hpp"

namespace sarl {

/**
 * Everything needed to rebuild and evaluate a trained head: the effective
 * training config as key=value text, the data dimensions, the training
 * weights and, when EMA was on, the shadow weights.
 */
struct Checkpoint {
  TrainConfig config;
  PayloadKind kind = PayloadKind::image;
  Shape sample_shape;
  Index classes = 0;
  ParameterSet<float> params;
  std::optional<ParameterSet<float>> ema;

  /// Shadow weights when present, otherwise the training weights.
  const ParameterSet<float>& eval_params() const { return ema ? *ema : params; }
  ModelConfig model_config() const;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b);
};

/// Layout, little-endian: magic "SARLCKPT", u32 version, u32 config length and
/// config text, u32 kind, u32 classes, u32 rank and dims, u32 flags (bit 0 =
/// EMA present), then each tensor set as u32 count and per tensor u32 name
/// length, name, u32 rank, u32 dims, float32 values.
std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sarl

#endif  // SARL_CHECKPOINT_HPP_
