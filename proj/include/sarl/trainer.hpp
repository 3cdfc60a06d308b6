#ifndef SARL_TRAINER_HPP_
#define SARL_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarl/checkpoint.hpp"
#include "sarl/config.hpp"
#include "sarl/data.hpp"
#include "sarl/metrics.hpp"
#include "sarl/parameters.hpp"

namespace sarl {

/// Raised when a loss, activation or gradient stops being finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

template <typename Scalar>
struct OptimizerState {
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;
  std::int64_t step = 0;

  explicit OptimizerState(const ParameterSet<Scalar>& params) {
    for (const auto& e : params) {
      m.emplace_back(e.value.shape());
      v.emplace_back(e.value.shape());
    }
  }
};

/// Adam with decoupled weight decay: p -= lr * (wd * p + m_hat / (sqrt(v_hat) + eps)).
template <typename Scalar>
void adamw_step(ParameterSet<Scalar>& params, const std::vector<Tensor<Scalar>>& grads, OptimizerState<Scalar>& state,
                const AdamWConfig& c) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adamw_step: gradient or state count differs from parameter count");
  }
  ++state.step;
  const double bias1 = 1 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].value;
    if (grads[k].shape() != p.shape()) throw DimensionError("adamw_step: gradient shape differs for " + params[k].name);
    auto& m = state.m[k].data();
    auto& v = state.v[k].data();
    const auto& g = grads[k].data();
    m = static_cast<Scalar>(c.beta1) * m + static_cast<Scalar>(1 - c.beta1) * g;
    v = static_cast<Scalar>(c.beta2) * v + static_cast<Scalar>(1 - c.beta2) * g.cwiseProduct(g);
    const auto m_hat = m.array() / static_cast<Scalar>(bias1);
    const auto v_hat = v.array() / static_cast<Scalar>(bias2);
    p.data().array() -= static_cast<Scalar>(c.lr) *
                        (static_cast<Scalar>(c.weight_decay) * p.data().array() + m_hat / (v_hat.sqrt() + static_cast<Scalar>(c.eps)));
  }
}

/// shadow <- decay * shadow + (1 - decay) * params
template <typename Scalar>
void ema_update(ParameterSet<Scalar>& shadow, const ParameterSet<Scalar>& params, double decay) {
  if (shadow.size() != params.size()) throw DimensionError("ema_update: parameter counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (shadow[k].value.shape() != params[k].value.shape()) throw DimensionError("ema_update: shape differs for " + params[k].name);
    shadow[k].value.data() =
        static_cast<Scalar>(decay) * shadow[k].value.data() + static_cast<Scalar>(1 - decay) * params[k].value.data();
  }
}

/// Decay actually used at optimizer step `step` (1-based): min(decay, (1 + step) / (10 + step)).
/// The ramp lets short desk-scale runs move the shadow away from initialization.
inline double ema_decay_at(double decay, std::int64_t step) {
  return std::min(decay, (1.0 + static_cast<double>(step)) / (10.0 + static_cast<double>(step)));
}

struct EpochLog {
  Index epoch = 0;
  double total = 0;
  double cls = 0;
  double map = 0;
  double transport = 0;
};

std::string format_epoch(const EpochLog& e);

struct EvalResult {
  PredictionSet predictions;
  MetricReport report;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> epochs;
  std::optional<EvalResult> test;  // present when a test split was given
};

/// Runs the full optimization. `log`, when given, receives the effective
/// config, one line per epoch and the final metric table.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset* test_set = nullptr,
                  std::ostream* log = nullptr);

/// Scores every sample in infer mode, using shadow weights when `use_ema` and present.
EvalResult evaluate(const Checkpoint& ckpt, const Dataset& data, bool use_ema = true);

/// Logits of one sample in infer mode.
Vector<double> predict_logits(const Checkpoint& ckpt, const Tensor<float>& input, bool use_ema = true);

struct AttentionMaps {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> semantic_map;        // column of M as PGM
  std::optional<std::vector<std::uint8_t>> attention;  // column of B as PGM; absent with disable-ot
};

AttentionMaps export_attention(const Checkpoint& ckpt, const Tensor<float>& input, Index class_id, bool use_ema = true);

}  // namespace sarl

#endif  // SARL_TRAINER_HPP_
