#ifndef SARL_LOSSES_HPP_
#define SARL_LOSSES_HPP_

#include "sarl/ops.hpp"
#include "sarl/representation.hpp"
#include "sarl/tape.hpp"
#include "sarl/tensor.hpp"

namespace sarl {

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

struct AslConfig {
  double gamma_pos = 0.0;
  double gamma_neg = 2.0;
  double clip = 0.05;  // probability shift for negatives

  void validate() const {
    if (gamma_pos < 0 || gamma_neg < 0) throw ConfigError("asl: focusing exponents must be >= 0");
    if (clip < 0 || clip >= 1) throw ConfigError("asl: clip must lie in [0, 1)");
  }
};

struct LossWeights {
  double lambda1 = 0.04;  // semantic map term
  double lambda2 = 0.5;   // transport term

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0) throw ConfigError("loss weights must be >= 0");
  }
};

/**
 * Asymmetric loss, averaged over every element of `probs`:
 *
 *   y = 1:  -(1 - p)^gamma_pos * log(p)
 *   y = 0:  -p_m^gamma_neg * log(1 - p_m),   p_m = max(p - clip, 0)
 */
template <typename Scalar>
Var<Scalar> asl(const Var<Scalar>& probs, const Tensor<Scalar>& labels, const AslConfig& cfg) {
  if (labels.shape() != probs.shape()) throw DimensionError("asl: labels and probabilities differ in shape");
  Tape<Scalar>& tape = probs.tape();
  const auto lo = static_cast<Scalar>(kProbClamp);
  Var<Scalar> p = clamp(probs, lo, Scalar(1) - lo);

  Var<Scalar> pos = mul(pow(add_scalar(neg(p), Scalar(1)), static_cast<Scalar>(cfg.gamma_pos)), log(p));
  Var<Scalar> shifted = relu(add_scalar(p, static_cast<Scalar>(-cfg.clip)));
  Var<Scalar> negative =
      mul(pow(shifted, static_cast<Scalar>(cfg.gamma_neg)), log(add_scalar(neg(shifted), Scalar(1))));

  Var<Scalar> y = tape.constant(labels);
  Var<Scalar> not_y = tape.constant(Tensor<Scalar>(labels.shape(), (Scalar(1) - labels.data().array()).matrix().eval()));
  return neg(mean(add(mul(y, pos), mul(not_y, negative))));
}

/// ASL on sigmoid of the per-class maximum over patches of M.
template <typename Scalar>
Var<Scalar> semantic_map_loss(const Var<Scalar>& semantic_map, const Tensor<Scalar>& labels, const AslConfig& cfg) {
  return asl(sigmoid(max_axis(semantic_map, 0)), labels, cfg);
}

/// ASL on sigmoid of the aggregated logits.
template <typename Scalar>
Var<Scalar> classification_loss(const Var<Scalar>& logits, const Tensor<Scalar>& labels, const AslConfig& cfg) {
  return asl(sigmoid(logits), labels, cfg);
}

template <typename Scalar>
Var<Scalar> total_loss(const Var<Scalar>& cls, const Var<Scalar>& map, const Var<Scalar>& transport,
                       const LossWeights& w) {
  return add(cls, add(scale(map, static_cast<Scalar>(w.lambda1)), scale(transport, static_cast<Scalar>(w.lambda2))));
}

inline double total_loss(double cls, double map, double transport, const LossWeights& w) {
  return cls + w.lambda1 * map + w.lambda2 * transport;
}

}  // namespace sarl

#endif  // SARL_LOSSES_HPP_
