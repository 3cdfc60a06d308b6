#include "sarl/gradient_suite.hpp"

#include <cmath>

#include "sarl/gradcheck.hpp"
#include "sarl/head.hpp"

namespace sarl {

namespace {

using TensorD = Tensor<double>;
using VarD = Var<double>;
using Inputs = std::vector<VarD>;

FeatureMap<double> as_map(const VarD& f) { return {f, 1, f.shape()[0]}; }

// Distinct, well-separated entries so max reductions stay away from ties.
TensorD spread(Shape shape, double phase) {
  TensorD t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = 2.0 * std::sin(1.7 * static_cast<double>(i) + phase);
  return t;
}

ModelConfig tiny_model(EncoderMode mode) {
  ModelConfig cfg;
  cfg.encoder.mode = mode;
  if (mode == EncoderMode::precomputed) {
    cfg.encoder.input_height = 2;
    cfg.encoder.input_width = 2;
  } else {
    cfg.encoder.hidden_channels = 4;
  }
  cfg.encoder.feature_dim = 8;
  cfg.classes = 3;
  cfg.label_dim = 4;
  cfg.heads = 2;
  cfg.joint_dim = 4;
  cfg.output_dim = 4;
  return cfg;
}

GradSuiteEntry full_model(const std::string& name, EncoderMode mode, std::uint64_t seed) {
  const ModelConfig cfg = tiny_model(mode);
  auto m = init_model<double>(cfg, seed);
  Rng rng(seed + 1);
  std::vector<std::string> names;
  std::vector<TensorD> inputs;
  for (auto& e : m.params) {
    // Nonzero biases and unit-scale embeddings exercise every path.
    if (e.name.ends_with("bias") || e.name == "labels.embedding") e.value = uniform_tensor<double>(e.value.shape(), rng);
    names.push_back(e.name);
    inputs.push_back(e.value);
  }
  const TensorD x = uniform_tensor<double>(cfg.encoder.input_shape(), rng);
  const TensorD y = TensorD::vector({1, 0, 1});
  const Objective obj{AslConfig{}, LossWeights{0.2, 0.5}};
  const bool input_is_leaf = mode == EncoderMode::precomputed;
  if (input_is_leaf) {
    names.push_back("input");
    inputs.push_back(x);
  }
  auto fn = [&](Tape<double>& tape, const Inputs& v) {
    const Inputs params(v.begin(), input_is_leaf ? v.end() - 1 : v.end());
    const std::vector<std::string> pnames(names.begin(), input_is_leaf ? names.end() - 1 : names.end());
    BoundParameters<double> p(pnames, params);
    return forward(p, cfg, input_is_leaf ? v.back() : tape.constant(x), Mode::train, &y, obj).loss_total;
  };
  auto r = gradient_check(fn, inputs);
  return {name, r.max_rel_error, 1e-3, names[r.worst_input]};
}

GradSuiteEntry component(const std::string& name, const ScalarFunction& fn, const std::vector<TensorD>& inputs) {
  auto r = gradient_check(fn, inputs);
  return {name, r.max_rel_error, 1e-4, "input " + std::to_string(r.worst_input)};
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed) {
  Rng rng(seed);
  auto u = [&](Shape s) { return uniform_tensor<double>(std::move(s), rng); };
  std::vector<GradSuiteEntry> out;
  const TensorD y = TensorD::vector({1, 0, 1});
  const AslConfig focal{1.0, 2.0, 0.05};

  out.push_back(component(
      "self_attention",
      [](Tape<double>&, const Inputs& v) {
        return sum(tanh(self_attention(as_map(v[0]), SelfAttentionParams<double>{v[1], v[2], v[3], 2}).features));
      },
      {u({4, 8}), u({8, 8}), u({8, 8}), u({8, 8})}));
  out.push_back(component(
      "global_spatial_pool(avg)",
      [](Tape<double>&, const Inputs& v) { return sum(tanh(global_spatial_pool(as_map(v[0]), Pooling::avg))); },
      {u({4, 8})}));
  out.push_back(component(
      "global_spatial_pool(max)",
      [](Tape<double>&, const Inputs& v) { return sum(tanh(global_spatial_pool(as_map(v[0]), Pooling::max))); },
      {spread({4, 8}, 0.4)}));
  out.push_back(component(
      "fuse_semantic",
      [](Tape<double>&, const Inputs& v) {
        return sum(tanh(fuse_semantic(v[0], v[1], FusionParams<double>{v[2], v[3]})));
      },
      {u({8}), u({3, 4}), u({12, 8}), u({8})}));
  out.push_back(component(
      "cost_matrix",
      [](Tape<double>&, const Inputs& v) { return sum(mul(cost_matrix(as_map(v[0]), v[1]), v[2])); },
      {u({4, 8}), u({3, 8}), u({4, 3})}));
  out.push_back(component(
      "bilinear_mass",
      [](Tape<double>&, const Inputs& v) {
        return sum(tanh(bilinear_mass(as_map(v[0]), v[1], TransportParams<double>{v[2], v[3], v[4], v[5], v[6]})));
      },
      {u({4, 8}), u({3, 8}), u({8, 4}), u({8, 4}), u({4, 4}), u({4}), u({4, 1})}));
  out.push_back(component(
      "semantic_attention+semantic_repr",
      [](Tape<double>&, const Inputs& v) { return sum(tanh(semantic_repr(semantic_attention(v[0]), v[1]))); },
      {u({4, 3}), u({3, 8})}));
  out.push_back(component(
      "region_score_aggregate",
      [](Tape<double>&, const Inputs& v) {
        return sum(tanh(region_score_aggregate(v[0], ClassifierParams<double>{v[1], v[2]})));
      },
      {u({4, 8}), u({8, 3}), u({3})}));

  out.push_back(component(
      "asl", [&](Tape<double>&, const Inputs& v) { return asl(sigmoid(v[0]), y, focal); }, {u({3})}));
  out.push_back(component(
      "semantic_map_loss", [&](Tape<double>&, const Inputs& v) { return semantic_map_loss(v[0], y, AslConfig{}); },
      {spread({4, 3}, 0.3)}));
  out.push_back(component(
      "classification_loss", [&](Tape<double>&, const Inputs& v) { return classification_loss(v[0], y, AslConfig{}); },
      {u({3})}));
  out.push_back(component(
      "ct_loss",
      [&](Tape<double>& tape, const Inputs& v) {
        // v: F, F^S, A, M
        auto theta = source_distribution(v[3], y);
        auto beta = target_distribution(tape.constant(y));
        return ct_loss(forward_plan(v[2], theta), backward_plan(v[2], beta), cost_matrix(as_map(v[0]), v[1]));
      },
      {u({4, 8}), u({3, 8}), u({4, 3}), u({4, 3})}));
  out.push_back(component(
      "total_loss",
      [&](Tape<double>& tape, const Inputs& v) {
        // v: z, M, F, F^S, A
        auto theta = source_distribution(v[1], y);
        auto beta = target_distribution(tape.constant(y));
        auto ot = ct_loss(forward_plan(v[4], theta), backward_plan(v[4], beta), cost_matrix(as_map(v[2]), v[3]));
        return total_loss(classification_loss(v[0], y, AslConfig{}), semantic_map_loss(v[1], y, AslConfig{}), ot,
                          LossWeights{0.04, 0.5});
      },
      {u({3}), spread({4, 3}, 0.9), u({4, 8}), u({3, 8}), u({4, 3})}));

  out.push_back(full_model("full model (precomputed, P=4 C=3 d_v=8 d_1=4 d_2=4)", EncoderMode::precomputed, seed + 10));
  out.push_back(full_model("full model (tiny-conv 8x8x3, P=4 C=3 d_v=8 d_1=4 d_2=4)", EncoderMode::tiny_conv, seed + 20));
  return out;
}

}  // namespace sarl
