#ifndef SARL_RANDOM_HPP_
#define SARL_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <random>

#include "sarl/tensor.hpp"

namespace sarl {

using Rng = std::mt19937_64;

template <typename Scalar>
Tensor<Scalar> uniform_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
Tensor<Scalar> gaussian_tensor(Shape shape, Rng& rng, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

/// Glorot/Xavier uniform init for a fan_in x fan_out projection.
template <typename Scalar>
Tensor<Scalar> xavier_uniform(Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_tensor<Scalar>(Shape{fan_in, fan_out}, rng, -limit, limit);
}

}  // namespace sarl

#endif  // SARL_RANDOM_HPP_
