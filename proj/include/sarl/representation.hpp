#ifndef SARL_REPRESENTATION_HPP_
#define SARL_REPRESENTATION_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "sarl/ops.hpp"
#include "sarl/tape.hpp"
#include "sarl/tensor.hpp"

namespace sarl {

/// Thrown for inconsistent model, encoder or training configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class EncoderMode { tiny_conv, precomputed };
enum class Pooling { avg, max };

/**
 * Feature extractor geometry. In tiny-conv mode the input is an
 * input_height x input_width x in_channels image that passes through `blocks`
 * 3x3 stride-2 convolutions (padding 1, ReLU); in precomputed mode the input
 * already is the P x feature_dim grid and input_height/input_width are the grid.
 */
struct EncoderConfig {
  EncoderMode mode = EncoderMode::tiny_conv;
  Index in_channels = 3;
  Index input_height = 8;
  Index input_width = 8;
  Index feature_dim = 32;
  Index blocks = 2;
  Index hidden_channels = 16;

  static constexpr Index kernel = 3;
  static constexpr Index stride = 2;
  static constexpr Index padding = 1;

  static Index conv_output(Index n) { return (n + 2 * padding - kernel) / stride + 1; }

  Index grid_height() const {
    Index h = input_height;
    if (mode == EncoderMode::tiny_conv)
      for (Index b = 0; b < blocks; ++b) h = conv_output(h);
    return h;
  }
  Index grid_width() const {
    Index w = input_width;
    if (mode == EncoderMode::tiny_conv)
      for (Index b = 0; b < blocks; ++b) w = conv_output(w);
    return w;
  }
  Index patches() const { return grid_height() * grid_width(); }

  /// Output channels of conv block `b`; the last block emits feature_dim.
  Index block_channels(Index b) const { return b + 1 == blocks ? feature_dim : hidden_channels; }
  Index block_inputs(Index b) const { return b == 0 ? in_channels : hidden_channels; }

  Shape input_shape() const {
    if (mode == EncoderMode::precomputed) return Shape{input_height * input_width, feature_dim};
    return Shape{input_height, input_width, in_channels};
  }

  void validate() const {
    if (input_height < 1 || input_width < 1 || feature_dim < 1) throw ConfigError("encoder: H, W and d_v must be >= 1");
    if (mode == EncoderMode::tiny_conv) {
      if (blocks < 1) throw ConfigError("encoder: tiny-conv needs at least one block");
      if (in_channels < 1 || hidden_channels < 1) throw ConfigError("encoder: channel counts must be >= 1");
    }
  }
};

template <typename Scalar>
struct FeatureMap {
  Var<Scalar> features;  // P x d_v
  Index height = 0;
  Index width = 0;

  Index patches() const { return height * width; }
};

template <typename Scalar>
struct EncoderParams {
  std::vector<Var<Scalar>> weights;  // (9 * c_in) x c_out per block
  std::vector<Var<Scalar>> biases;   // c_out per block
};

template <typename Scalar>
FeatureMap<Scalar> encode(const Var<Scalar>& input, const EncoderParams<Scalar>& params, const EncoderConfig& cfg) {
  if (input.shape() != cfg.input_shape()) {
    throw ConfigError("encoder input " + shape_string(input.shape()) + " does not match configured " +
                      shape_string(cfg.input_shape()));
  }
  if (cfg.mode == EncoderMode::precomputed) return {input, cfg.input_height, cfg.input_width};

  if (static_cast<Index>(params.weights.size()) != cfg.blocks) throw ConfigError("encoder: wrong number of blocks");
  Var<Scalar> x = input;
  Index h = cfg.input_height, w = cfg.input_width;
  Var<Scalar> y;
  for (Index b = 0; b < cfg.blocks; ++b) {
    Var<Scalar> cols = im2col(x, EncoderConfig::kernel, EncoderConfig::stride, EncoderConfig::padding);
    y = relu(add_rowwise(matmul(cols, params.weights[b]), params.biases[b]));
    h = EncoderConfig::conv_output(h);
    w = EncoderConfig::conv_output(w);
    if (b + 1 < cfg.blocks) x = reshape(y, Shape{h, w, cfg.block_channels(b)});
  }
  return {y, h, w};
}

template <typename Scalar>
struct SelfAttentionParams {
  Var<Scalar> query;  // d_v x d_v
  Var<Scalar> key;
  Var<Scalar> value;
  Index heads = 8;
};

/**
 * Multi-head self-attention over patches. Head h uses column slice
 * [h*d, (h+1)*d) of each projection, d = d_v / heads, and computes
 * softmax(Q_h K_h^T / sqrt(d)) V_h; head outputs are concatenated. There is no
 * output projection, residual path or normalization.
 */
template <typename Scalar>
FeatureMap<Scalar> self_attention(const FeatureMap<Scalar>& in, const SelfAttentionParams<Scalar>& p) {
  const Index dv = in.features.shape()[1];
  if (p.heads < 1 || dv % p.heads != 0) {
    throw ConfigError("self_attention: d_v=" + std::to_string(dv) + " not divisible by heads=" +
                      std::to_string(p.heads));
  }
  const Index d = dv / p.heads;
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(d));
  Var<Scalar> q = matmul(in.features, p.query);
  Var<Scalar> k = matmul(in.features, p.key);
  Var<Scalar> v = matmul(in.features, p.value);
  std::vector<Var<Scalar>> heads;
  for (Index h = 0; h < p.heads; ++h) {
    Var<Scalar> qh = slice(q, 1, h * d, d);
    Var<Scalar> kh = slice(k, 1, h * d, d);
    Var<Scalar> vh = slice(v, 1, h * d, d);
    Var<Scalar> weights = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt_d), 1);
    heads.push_back(matmul(weights, vh));
  }
  Var<Scalar> out = p.heads == 1 ? heads.front() : concat(heads, 1);
  return {out, in.height, in.width};
}

/// Column-wise mean or max over patches: P x d_v -> d_v.
template <typename Scalar>
Var<Scalar> global_spatial_pool(const FeatureMap<Scalar>& f, Pooling mode) {
  if (f.features.shape()[0] < 1) throw ContractError("global_spatial_pool: no patches");
  return mode == Pooling::avg ? mean_axis(f.features, 0) : max_axis(f.features, 0);
}

template <typename Scalar>
struct FusionParams {
  Var<Scalar> weight;  // (d_v + d_t) x d_v
  Var<Scalar> bias;    // d_v
};

/// Row c of the result is Linear(concat(global, label_c)): C x d_v.
template <typename Scalar>
Var<Scalar> fuse_semantic(const Var<Scalar>& global, const Var<Scalar>& labels, const FusionParams<Scalar>& p) {
  const Index dv = global.size();
  if (labels.value().rank() != 2) throw DimensionError("fuse_semantic: label embeddings must be C x d_t");
  const Index classes = labels.shape()[0];
  if (p.weight.shape() != Shape{dv + labels.shape()[1], p.bias.size()}) {
    throw DimensionError("fuse_semantic: weight " + shape_string(p.weight.shape()) + " does not accept width " +
                         std::to_string(dv + labels.shape()[1]));
  }
  Var<Scalar> tiled = gather_rows(reshape(global, Shape{1, dv}), std::vector<Index>(classes, 0));
  return add_rowwise(matmul(concat<Scalar>({tiled, labels}, 1), p.weight), p.bias);
}

}  // namespace sarl

#endif  // SARL_REPRESENTATION_HPP_
