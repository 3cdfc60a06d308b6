#include "sarl/trainer.hpp"

#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sarl/export.hpp"
#include "sarl/head.hpp"

namespace sarl {

namespace {

void require_finite(const char* name, const Var<float>& v, Index epoch, Index sample) {
  if (v.valid() && !v.value().all_finite()) {
    throw NonFiniteError("non-finite values in " + std::string(name) + " (epoch " + std::to_string(epoch) + ", sample " +
                         std::to_string(sample) + ")");
  }
}

// Forward outputs in pipeline order, so the first failure names the earliest culprit.
void check_outputs(const ForwardOutputs<float>& out, Index epoch, Index sample) {
  require_finite("features F", out.features.features, epoch, sample);
  require_finite("semantic map M", out.semantic_map, epoch, sample);
  require_finite("global feature F^G", out.global, epoch, sample);
  require_finite("semantic features F^S", out.semantic, epoch, sample);
  require_finite("transport mass A", out.mass, epoch, sample);
  require_finite("attention B", out.attention, epoch, sample);
  require_finite("representation F^R", out.representation, epoch, sample);
  require_finite("logits z", out.logits, epoch, sample);
  require_finite("theta", out.theta, epoch, sample);
  require_finite("beta", out.beta, epoch, sample);
  require_finite("cost matrix CO", out.cost, epoch, sample);
  require_finite("loss L_cls", out.loss_cls, epoch, sample);
  require_finite("loss L_m", out.loss_map, epoch, sample);
  require_finite("loss L_OT", out.loss_transport, epoch, sample);
  require_finite("loss total", out.loss_total, epoch, sample);
}

void check_compatible(const ModelConfig& m, const Dataset& data, const char* what) {
  if (data.classes != m.classes || data.sample_shape != m.encoder.input_shape()) {
    throw ConfigError(std::string(what) + ": dataset has C=" + std::to_string(data.classes) + ", samples " +
                      shape_string(data.sample_shape) + "; model expects C=" + std::to_string(m.classes) + ", samples " +
                      shape_string(m.encoder.input_shape()));
  }
}

double item(const Var<float>& v) { return v.valid() ? static_cast<double>(v.value().item()) : 0.0; }

}  // namespace

std::string format_epoch(const EpochLog& e) {
  std::ostringstream out;
  out << std::setprecision(9) << "epoch=" << e.epoch << " loss=" << e.total << " cls=" << e.cls << " map=" << e.map
      << " ot=" << e.transport;
  return out.str();
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset* test_set, std::ostream* log) {
  cfg.validate();
  if (train_set.samples.empty()) throw ConfigError("train: empty training set");
  const ModelConfig model = cfg.model_config(train_set);
  check_compatible(model, train_set, "train");
  if (test_set) check_compatible(model, *test_set, "train (test split)");
  for (Index i = 0; i < train_set.size(); ++i) {
    if (!(train_set.samples[static_cast<std::size_t>(i)].labels.data().sum() > 0)) {
      throw ContractError("train: sample " + std::to_string(i) + " has no positive label");
    }
  }
  if (log) *log << "# effective config\n" << to_text(cfg) << std::flush;

  const Objective objective = cfg.objective();
  const AdamWConfig adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay};

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = cfg;
  ckpt.kind = train_set.kind;
  ckpt.sample_shape = train_set.sample_shape;
  ckpt.classes = train_set.classes;
  ckpt.params = init_model<float>(model, cfg.seed).params;
  if (cfg.ema) ckpt.ema = ckpt.params;
  OptimizerState<float> state(ckpt.params);

  // Separate stream from initialization so the shuffle order does not depend on model size.
  Rng shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<Index> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), Index{0});

  std::vector<Tensor<float>> grads;
  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog entry{epoch};
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grads.clear();
      for (const auto& e : ckpt.params) grads.emplace_back(e.value.shape());
      for (std::size_t i = start; i < stop; ++i) {
        const Index idx = order[i];
        const Sample& s = train_set.samples[static_cast<std::size_t>(idx)];
        Tape<float> tape;
        BoundParameters<float> bound(tape, ckpt.params, true);
        auto out = forward(bound, model, tape.constant(s.input), Mode::train, &s.labels, objective);
        check_outputs(out, epoch, idx);
        tape.backward(out.loss_total);
        const auto g = bound.gradients();
        for (std::size_t k = 0; k < grads.size(); ++k) {
          if (!g[k].all_finite()) {
            throw NonFiniteError("non-finite gradient for " + ckpt.params[k].name + " (epoch " + std::to_string(epoch) +
                                 ", sample " + std::to_string(idx) + ")");
          }
          grads[k].data() += g[k].data();
        }
        entry.total += item(out.loss_total);
        entry.cls += item(out.loss_cls);
        entry.map += item(out.loss_map);
        entry.transport += item(out.loss_transport);
      }
      const auto n = static_cast<float>(stop - start);
      for (auto& g : grads) g.data() /= n;
      adamw_step(ckpt.params, grads, state, adam);
      if (ckpt.ema) ema_update(*ckpt.ema, ckpt.params, ema_decay_at(cfg.ema_decay, state.step));
    }
    const auto n = static_cast<double>(train_set.size());
    entry.total /= n;
    entry.cls /= n;
    entry.map /= n;
    entry.transport /= n;
    result.epochs.push_back(entry);
    if (log) *log << format_epoch(entry) << "\n" << std::flush;
  }

  if (test_set) {
    result.test = evaluate(ckpt, *test_set, true);
    if (log) *log << "# test metrics" << (ckpt.ema ? " (ema weights)" : "") << "\n" << format_table(result.test->report);
  }
  return result;
}

Vector<double> predict_logits(const Checkpoint& ckpt, const Tensor<float>& input, bool use_ema) {
  const ModelConfig model = ckpt.model_config();
  Tape<float> tape;
  BoundParameters<float> bound(tape, use_ema ? ckpt.eval_params() : ckpt.params, false);
  auto out = forward(bound, model, tape.constant(input), Mode::infer);
  return out.logits.value().data().cast<double>();
}

EvalResult evaluate(const Checkpoint& ckpt, const Dataset& data, bool use_ema) {
  const ModelConfig model = ckpt.model_config();
  check_compatible(model, data, "evaluate");
  EvalResult r;
  r.predictions.scores.resize(data.size(), data.classes);
  r.predictions.labels.resize(data.size(), data.classes);
  for (Index i = 0; i < data.size(); ++i) {
    const Sample& s = data.samples[static_cast<std::size_t>(i)];
    const Vector<double> z = predict_logits(ckpt, s.input, use_ema);
    for (Index c = 0; c < data.classes; ++c) {
      r.predictions.scores(i, c) = 1.0 / (1.0 + std::exp(-z[c]));
      r.predictions.labels(i, c) = s.labels[c] > 0.5f ? 1.0 : 0.0;
    }
  }
  r.report = evaluate_predictions(r.predictions);
  return r;
}

AttentionMaps export_attention(const Checkpoint& ckpt, const Tensor<float>& input, Index class_id, bool use_ema) {
  const ModelConfig model = ckpt.model_config();
  if (class_id < 0 || class_id >= model.classes) {
    throw ConfigError("export-attention: class id " + std::to_string(class_id) + " outside [0, " +
                      std::to_string(model.classes) + ")");
  }
  Tape<float> tape;
  BoundParameters<float> bound(tape, use_ema ? ckpt.eval_params() : ckpt.params, false);
  auto out = forward(bound, model, tape.constant(input), Mode::infer);
  AttentionMaps maps;
  maps.height = out.features.height;
  maps.width = out.features.width;
  auto column = [&](const Var<float>& v) { return v.value().matrix().col(class_id).cast<double>().eval(); };
  maps.semantic_map = heatmap_pgm(column(out.semantic_map), maps.height, maps.width);
  if (out.attention.valid()) maps.attention = heatmap_pgm(column(out.attention), maps.height, maps.width);
  return maps;
}

}  // namespace sarl
