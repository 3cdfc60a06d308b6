#ifndef SARL_OT_ATTENTION_HPP_
#define SARL_OT_ATTENTION_HPP_

#include <limits>
#include <vector>

#include "sarl/ops.hpp"
#include "sarl/representation.hpp"
#include "sarl/tape.hpp"
#include "sarl/tensor.hpp"

namespace sarl {

/// Floor on feature norms before dividing in the cosine cost.
inline constexpr double kCostNormEpsilon = 1e-8;

/// Patch-level class evidence M = F * W (P x C, pre-sigmoid).
template <typename Scalar>
Var<Scalar> semantic_map(const FeatureMap<Scalar>& f, const Var<Scalar>& weights) {
  return matmul(f.features, weights);
}

namespace detail {

template <typename Scalar>
Var<Scalar> normalize_rows(const Var<Scalar>& x) {
  Var<Scalar> norms = sqrt(sum_axis(mul(x, x), 1));
  Var<Scalar> guarded = clamp(norms, static_cast<Scalar>(kCostNormEpsilon), std::numeric_limits<Scalar>::infinity());
  return mul_colwise(x, reciprocal(guarded));
}

}  // namespace detail

/// Cosine distance co_pc = 1 - cos(f_p, f^S_c), P x C, entries in [0, 2].
/// Norms are floored at kCostNormEpsilon, so an all-zero row costs exactly 1.
template <typename Scalar>
Var<Scalar> cost_matrix(const FeatureMap<Scalar>& f, const Var<Scalar>& semantic) {
  if (f.features.shape()[1] != semantic.shape()[1]) throw DimensionError("cost_matrix: feature widths differ");
  Var<Scalar> cosine = matmul(detail::normalize_rows(f.features), transpose(detail::normalize_rows(semantic)));
  return add_scalar(neg(cosine), Scalar(1));
}

/// theta = softmax over patches of M * (y / sum(y)). Needs at least one positive label.
template <typename Scalar>
Var<Scalar> source_distribution(const Var<Scalar>& semantic_map, const Tensor<Scalar>& labels) {
  const Index classes = semantic_map.shape()[1];
  if (labels.size() != classes) throw DimensionError("source_distribution: label length differs from class count");
  const Scalar positives = labels.data().sum();
  if (!(positives > Scalar(0))) throw ContractError("source_distribution: label vector has no positive entry");
  Tensor<Scalar> weights(Shape{classes, 1}, (labels.data() / positives).eval());
  Var<Scalar> mixed = matmul(semantic_map, semantic_map.tape().constant(std::move(weights)));
  return softmax(reshape(mixed, Shape{semantic_map.shape()[0]}), 0);
}

/// beta = softmax(y) over classes.
template <typename Scalar>
Var<Scalar> target_distribution(const Var<Scalar>& labels) {
  if (labels.value().rank() != 1) throw DimensionError("target_distribution: labels must be a vector");
  return softmax(labels, 0);
}

template <typename Scalar>
struct TransportParams {
  Var<Scalar> u;     // d_v x d_1
  Var<Scalar> v;     // d_v x d_1
  Var<Scalar> proj;  // d_1 x d_2
  Var<Scalar> bias;  // d_2
  Var<Scalar> out;   // d_2 x 1
};

/**
 * Low-rank bilinear transport mass, evaluated for every (patch, class) pair:
 *
 *   a_pc = w^T ( tanh((f_p U) .* (f^S_c V)) P + b )
 *
 * The pairwise products are laid out as a (P*C) x d_1 block, row p*C + c.
 */
template <typename Scalar>
Var<Scalar> bilinear_mass(const FeatureMap<Scalar>& f, const Var<Scalar>& semantic, const TransportParams<Scalar>& p) {
  const Index patches = f.features.shape()[0];
  const Index classes = semantic.shape()[0];
  Var<Scalar> fu = matmul(f.features, p.u);
  Var<Scalar> sv = matmul(semantic, p.v);
  std::vector<Index> patch_of(static_cast<std::size_t>(patches * classes));
  std::vector<Index> class_of(patch_of.size());
  for (Index i = 0; i < patches; ++i)
    for (Index c = 0; c < classes; ++c) {
      patch_of[static_cast<std::size_t>(i * classes + c)] = i;
      class_of[static_cast<std::size_t>(i * classes + c)] = c;
    }
  Var<Scalar> joint = tanh(mul(gather_rows(fu, std::move(patch_of)), gather_rows(sv, std::move(class_of))));
  Var<Scalar> hidden = add_rowwise(matmul(joint, p.proj), p.bias);
  return reshape(matmul(hidden, p.out), Shape{patches, classes});
}

enum class PlanDirection { forward, backward };

/// Conditional transport plan stored patch-major (P x C) in both directions.
template <typename Scalar>
struct TransportPlan {
  Var<Scalar> plan;
  PlanDirection direction;
};

/// t->_pc = theta_p * softmax_c(a_p,.); row p sums to theta_p.
template <typename Scalar>
TransportPlan<Scalar> forward_plan(const Var<Scalar>& mass, const Var<Scalar>& theta) {
  return {mul_colwise(softmax(mass, 1), theta), PlanDirection::forward};
}

/// t<-_cp = beta_c * softmax_p(a_.,c); column c sums to beta_c.
template <typename Scalar>
TransportPlan<Scalar> backward_plan(const Var<Scalar>& mass, const Var<Scalar>& beta) {
  return {mul_rowwise(softmax(mass, 0), beta), PlanDirection::backward};
}

/// Bidirectional conditional transport cost sum(T-> .* CO) + sum(T<- .* CO).
template <typename Scalar>
Var<Scalar> ct_loss(const TransportPlan<Scalar>& fwd, const TransportPlan<Scalar>& bwd, const Var<Scalar>& cost) {
  if (fwd.direction != PlanDirection::forward || bwd.direction != PlanDirection::backward) {
    throw ContractError("ct_loss: plans passed in the wrong order");
  }
  return add(sum(mul(fwd.plan, cost)), sum(mul(bwd.plan, cost)));
}

/// B = row-softmax of the transport mass.
template <typename Scalar>
Var<Scalar> semantic_attention(const Var<Scalar>& mass) {
  return softmax(mass, 1);
}

/// F^R = B * F^S: every patch becomes a convex mix of the class features.
template <typename Scalar>
Var<Scalar> semantic_repr(const Var<Scalar>& attention, const Var<Scalar>& semantic) {
  return matmul(attention, semantic);
}

}  // namespace sarl

#endif  // SARL_OT_ATTENTION_HPP_
