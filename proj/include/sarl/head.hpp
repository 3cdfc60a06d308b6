#ifndef SARL_HEAD_HPP_
#define SARL_HEAD_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sarl/losses.hpp"
#include "sarl/ops.hpp"
#include "sarl/ot_attention.hpp"
#include "sarl/parameters.hpp"
#include "sarl/random.hpp"
#include "sarl/representation.hpp"

namespace sarl {

template <typename Scalar>
struct ClassifierParams {
  Var<Scalar> weight;  // d_v x C
  Var<Scalar> bias;    // C
};

/**
 * Region score aggregation. Patch scores S = F^R W + b (P x C) are weighted by
 * a softmax over patches taken independently for each class, and
 * z_c = sum_p softmax_p(S)_pc * S_pc.
 */
template <typename Scalar>
Var<Scalar> region_score_aggregate(const Var<Scalar>& representation, const ClassifierParams<Scalar>& cls) {
  if (representation.shape()[0] < 1) throw ContractError("region_score_aggregate: no patches");
  Var<Scalar> scores = add_rowwise(matmul(representation, cls.weight), cls.bias);
  Var<Scalar> weights = softmax(scores, 0);
  return sum_axis(mul(weights, scores), 0);
}

struct AblationFlags {
  bool disable_self_attention = false;
  // Classifier reads F instead of F^R; no semantic map loss, theta, beta or transport loss.
  bool disable_transport = false;
  // F^S is built from the label embeddings alone (zero global feature).
  bool disable_gsp_fusion = false;
};

struct ModelConfig {
  EncoderConfig encoder;
  Index classes = 6;
  Index label_dim = 16;
  Index heads = 8;
  Index joint_dim = 16;   // d_1
  Index output_dim = 16;  // d_2
  Pooling pooling = Pooling::avg;
  AblationFlags ablation;

  Index feature_dim() const { return encoder.feature_dim; }

  void validate() const {
    encoder.validate();
    if (classes < 1) throw ConfigError("model: need at least one class");
    if (label_dim < 1 || joint_dim < 1 || output_dim < 1) throw ConfigError("model: d_t, d_1, d_2 must be >= 1");
    if (heads < 1 || feature_dim() % heads != 0) {
      throw ConfigError("model: d_v=" + std::to_string(feature_dim()) + " is not divisible by heads=" +
                        std::to_string(heads));
    }
  }
};

struct Objective {
  AslConfig asl;
  LossWeights weights;
};

template <typename Scalar>
struct ModelBundle {
  ModelConfig config;
  ParameterSet<Scalar> params;

  template <typename Other>
  ModelBundle<Other> cast() const {
    return {config, params.template cast<Other>()};
  }
};

/// Xavier-uniform projections, zero biases, N(0, 0.02^2) label embeddings.
template <typename Scalar>
ModelBundle<Scalar> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParameterSet<Scalar> ps;
  const Index dv = cfg.feature_dim();
  const EncoderConfig& enc = cfg.encoder;
  if (enc.mode == EncoderMode::tiny_conv) {
    for (Index b = 0; b < enc.blocks; ++b) {
      const Index fan_in = EncoderConfig::kernel * EncoderConfig::kernel * enc.block_inputs(b);
      ps.add("encoder.conv" + std::to_string(b) + ".weight", xavier_uniform<Scalar>(fan_in, enc.block_channels(b), rng));
      ps.add("encoder.conv" + std::to_string(b) + ".bias", Tensor<Scalar>(Shape{enc.block_channels(b)}));
    }
  }
  ps.add("attention.query", xavier_uniform<Scalar>(dv, dv, rng));
  ps.add("attention.key", xavier_uniform<Scalar>(dv, dv, rng));
  ps.add("attention.value", xavier_uniform<Scalar>(dv, dv, rng));
  ps.add("labels.embedding", gaussian_tensor<Scalar>(Shape{cfg.classes, cfg.label_dim}, rng, 0.02));
  ps.add("fusion.weight", xavier_uniform<Scalar>(dv + cfg.label_dim, dv, rng));
  ps.add("fusion.bias", Tensor<Scalar>(Shape{dv}));
  ps.add("semantic_map.weight", xavier_uniform<Scalar>(dv, cfg.classes, rng));
  ps.add("transport.u", xavier_uniform<Scalar>(dv, cfg.joint_dim, rng));
  ps.add("transport.v", xavier_uniform<Scalar>(dv, cfg.joint_dim, rng));
  ps.add("transport.proj", xavier_uniform<Scalar>(cfg.joint_dim, cfg.output_dim, rng));
  ps.add("transport.bias", Tensor<Scalar>(Shape{cfg.output_dim}));
  ps.add("transport.out", xavier_uniform<Scalar>(cfg.output_dim, 1, rng));
  ps.add("classifier.weight", xavier_uniform<Scalar>(dv, cfg.classes, rng));
  ps.add("classifier.bias", Tensor<Scalar>(Shape{cfg.classes}));
  return {cfg, std::move(ps)};
}

enum class Mode { train, infer };

template <typename Scalar>
struct ForwardOutputs {
  FeatureMap<Scalar> features;  // after self-attention
  Var<Scalar> semantic_map;     // M, P x C
  // Transport branch; invalid Vars when disable_transport is set.
  Var<Scalar> global;          // F^G
  Var<Scalar> semantic;        // F^S
  Var<Scalar> mass;            // A
  Var<Scalar> attention;       // B
  Var<Scalar> representation;  // F^R (or F when transport is disabled)
  Var<Scalar> logits;          // z

  // Train mode only.
  Var<Scalar> theta;
  Var<Scalar> beta;
  Var<Scalar> cost;
  std::optional<TransportPlan<Scalar>> forward_plan;
  std::optional<TransportPlan<Scalar>> backward_plan;
  Var<Scalar> loss_cls;
  Var<Scalar> loss_map;
  Var<Scalar> loss_transport;
  Var<Scalar> loss_total;
};

/**
 * Full head for one sample. Infer mode never reads labels: only the encoder,
 * self-attention, fusion, transport mass, attention B, F^R and aggregation
 * run. Train mode additionally builds theta, beta, the cost matrix, both
 * plans and all loss terms.
 */
template <typename Scalar>
ForwardOutputs<Scalar> forward(const BoundParameters<Scalar>& p, const ModelConfig& cfg, const Var<Scalar>& input,
                               Mode mode, const Tensor<Scalar>* labels = nullptr, const Objective& objective = {}) {
  Tape<Scalar>& tape = input.tape();
  ForwardOutputs<Scalar> out;

  EncoderParams<Scalar> enc;
  if (cfg.encoder.mode == EncoderMode::tiny_conv) {
    for (Index b = 0; b < cfg.encoder.blocks; ++b) {
      enc.weights.push_back(p["encoder.conv" + std::to_string(b) + ".weight"]);
      enc.biases.push_back(p["encoder.conv" + std::to_string(b) + ".bias"]);
    }
  }
  FeatureMap<Scalar> f = encode(input, enc, cfg.encoder);
  if (!cfg.ablation.disable_self_attention) {
    f = self_attention(f, SelfAttentionParams<Scalar>{p["attention.query"], p["attention.key"], p["attention.value"],
                                                      cfg.heads});
  }
  out.features = f;
  out.semantic_map = semantic_map(f, p["semantic_map.weight"]);

  const bool transport = !cfg.ablation.disable_transport;
  if (transport) {
    out.global = cfg.ablation.disable_gsp_fusion ? tape.constant(Tensor<Scalar>(Shape{cfg.feature_dim()}))
                                                 : global_spatial_pool(f, cfg.pooling);
    out.semantic = fuse_semantic(out.global, p["labels.embedding"], FusionParams<Scalar>{p["fusion.weight"], p["fusion.bias"]});
    out.mass = bilinear_mass(f, out.semantic,
                             TransportParams<Scalar>{p["transport.u"], p["transport.v"], p["transport.proj"],
                                                     p["transport.bias"], p["transport.out"]});
    out.attention = semantic_attention(out.mass);
    out.representation = semantic_repr(out.attention, out.semantic);
  } else {
    out.representation = f.features;
  }
  out.logits = region_score_aggregate(out.representation, ClassifierParams<Scalar>{p["classifier.weight"], p["classifier.bias"]});

  if (mode == Mode::infer) return out;

  if (labels == nullptr) throw ContractError("forward: train mode needs labels");
  if (labels->size() != cfg.classes) throw DimensionError("forward: label vector length differs from class count");
  out.loss_cls = classification_loss(out.logits, *labels, objective.asl);
  if (!transport) {
    out.loss_total = out.loss_cls;
    return out;
  }
  out.theta = source_distribution(out.semantic_map, *labels);
  out.beta = target_distribution(tape.constant(*labels));
  out.cost = cost_matrix(f, out.semantic);
  out.forward_plan = forward_plan(out.mass, out.theta);
  out.backward_plan = backward_plan(out.mass, out.beta);
  out.loss_transport = ct_loss(*out.forward_plan, *out.backward_plan, out.cost);
  out.loss_map = semantic_map_loss(out.semantic_map, *labels, objective.asl);
  out.loss_total = total_loss(out.loss_cls, out.loss_map, out.loss_transport, objective.weights);
  return out;
}

}  // namespace sarl

#endif  // SARL_HEAD_HPP_
