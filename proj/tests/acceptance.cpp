// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "sarl/checkpoint.hpp"
#include "sarl/export.hpp"
#include "sarl/gradient_suite.hpp"
#include "sarl/head.hpp"
#include "sarl/random.hpp"
#include "sarl/trainer.hpp"
#include "test_util.hpp"

using namespace sarl;
using TensorD = Tensor<double>;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) detail << "first failure: " << why << "; ";
    pass = pass && ok;
  }
};

FeatureMap<double> as_map(const Var<double>& f) { return {f, f.shape()[0], 1}; }

TensorD random_labels(Index c, Rng& rng) {
  std::bernoulli_distribution coin(0.4);
  TensorD y(Shape{c});
  for (Index i = 0; i < c; ++i) y[i] = coin(rng) ? 1.0 : 0.0;
  y[static_cast<Index>(rng() % static_cast<std::uint64_t>(c))] = 1.0;
  return y;
}

Index uniform_index(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto entries = run_gradient_suite(0);
  const double secs = seconds_since(t0);
  double worst = 0;
  for (const auto& e : entries) {
    o.require(e.passed(), e.name + " rel err " + std::to_string(e.max_rel_error));
    worst = std::max(worst, e.max_rel_error / e.tolerance);
  }
  o.require(entries.size() >= 15, "suite is missing checks");
  o.require(secs < 120, "runtime " + std::to_string(secs) + " s");
  o.detail << entries.size() << " checks, worst err/tol " << worst << ", " << secs << " s";
  return o;
}

Outcome transport_invariants() {
  Outcome o;
  Rng rng(2024);
  double marginal = 0, simplex = 0, cost_lo = 2, cost_hi = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Index p = uniform_index(rng, 1, 9), c = uniform_index(rng, 1, 7), dv = uniform_index(rng, 1, 8);
    const Index d1 = uniform_index(rng, 1, 5), d2 = uniform_index(rng, 1, 5);
    const double scale = trial % 5 == 0 ? 20.0 : 2.0;  // some instances push the softmaxes into saturation
    Tape<double> tape;
    auto u = [&](Shape s) { return tape.constant(uniform_tensor<double>(std::move(s), rng, -scale, scale)); };
    auto f = u({p, dv}), fs = u({c, dv}), m = u({p, c});
    if (trial % 50 == 1) fs = tape.constant(TensorD(Shape{c, dv}));  // zero semantic rows exercise the norm guard
    const TensorD y = random_labels(c, rng);
    auto a = bilinear_mass(as_map(f), fs, TransportParams<double>{u({dv, d1}), u({dv, d1}), u({d1, d2}), u({d2}), u({d2, 1})});
    auto theta = source_distribution(m, y);
    auto beta = target_distribution(tape.constant(y));
    const auto fwd = forward_plan(a, theta).plan.value().matrix();
    const auto bwd = backward_plan(a, beta).plan.value().matrix();
    const auto& th = theta.value().data();
    const auto& be = beta.value().data();
    marginal = std::max({marginal, (fwd.rowwise().sum() - th).cwiseAbs().maxCoeff(),
                         (bwd.colwise().sum().transpose() - be).cwiseAbs().maxCoeff()});
    simplex = std::max({simplex, std::abs(th.sum() - 1), std::abs(be.sum() - 1)});
    o.require(th.minCoeff() >= 0 && be.minCoeff() >= 0, "negative marginal entry");
    o.require(fwd.minCoeff() >= 0 && bwd.minCoeff() >= 0, "negative plan entry");
    const auto cost = cost_matrix(as_map(f), fs).value().data();
    cost_lo = std::min(cost_lo, cost.minCoeff());
    cost_hi = std::max(cost_hi, cost.maxCoeff());
  }
  o.require(marginal <= 1e-9, "marginal error " + std::to_string(marginal));
  o.require(simplex <= 1e-9, "simplex error " + std::to_string(simplex));
  o.require(cost_lo >= 0 && cost_hi <= 2, "cost outside [0, 2]");
  o.detail << "500 instances, max marginal err " << marginal << ", max simplex err " << simplex << ", cost range [" << cost_lo
           << ", " << cost_hi << "]";
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> small(1, 6);
  double bilinear_err = 0, attention_err = 0, bce_err = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t p = small(rng), c = small(rng), heads = small(rng) % 3 + 1, dv = heads * small(rng);
    const std::size_t d1 = small(rng), d2 = small(rng);
    auto f = oracle::random_grid(p, dv, rng), s = oracle::random_grid(c, dv, rng);
    auto u = oracle::random_grid(dv, d1, rng), v = oracle::random_grid(dv, d1, rng), proj = oracle::random_grid(d1, d2, rng);
    auto w = oracle::random_grid(d2, 1, rng);
    auto b = oracle::random_grid(1, d2, rng)[0];
    auto q = oracle::random_grid(dv, dv, rng), k = oracle::random_grid(dv, dv, rng), wv = oracle::random_grid(dv, dv, rng);
    Tape<double> tape;
    auto cst = [&](const auto& g) { return tape.constant(testutil::to_tensor(g)); };
    const auto a = bilinear_mass(as_map(cst(f)), cst(s), TransportParams<double>{cst(u), cst(v), cst(proj), cst(b), cst(w)});
    bilinear_err = std::max(bilinear_err, testutil::max_abs_diff(a.value(), oracle::bilinear(f, s, u, v, proj, b, w)));
    const auto sa = self_attention(as_map(cst(f)), SelfAttentionParams<double>{cst(q), cst(k), cst(wv), static_cast<Index>(heads)});
    attention_err = std::max(attention_err, testutil::max_abs_diff(sa.features.value(), oracle::self_attention(f, q, k, wv, heads)));

    oracle::Row probs(c), y(c);
    std::uniform_real_distribution<double> unit(0.001, 0.999);
    for (std::size_t i = 0; i < c; ++i) {
      probs[i] = unit(rng);
      y[i] = rng() % 2 ? 1.0 : 0.0;
    }
    const double lib = asl(cst(probs), testutil::to_tensor(y), AslConfig{0.0, 0.0, 0.0}).value().item();
    bce_err = std::max(bce_err, std::abs(lib - oracle::bce(probs, y)));
  }
  o.require(bilinear_err <= 1e-10, "bilinear_mass err " + std::to_string(bilinear_err));
  o.require(attention_err <= 1e-10, "self_attention err " + std::to_string(attention_err));
  o.require(bce_err <= 1e-12, "asl vs BCE err " + std::to_string(bce_err));

  int ap_mismatch = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index n = std::uniform_int_distribution<Index>(1, 40)(rng);
    Vector<double> scores(n), labels(n);
    oracle::Row s(static_cast<std::size_t>(n));
    std::vector<int> l(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      // Half the instances use coarse scores so ties are common.
      s[static_cast<std::size_t>(i)] = scores[i] = t % 2 ? static_cast<double>(rng() % 5) : std::generate_canonical<double, 53>(rng);
      l[static_cast<std::size_t>(i)] = static_cast<int>(labels[i] = rng() % 3 == 0 ? 1.0 : 0.0);
    }
    l[0] = 1;
    labels[0] = 1;
    ap_mismatch += average_precision(scores, labels) != oracle::average_precision(s, l);
  }
  // mAP over random prediction sets against per-class oracle APs.
  for (int t = 0; t < 50; ++t) {
    PredictionSet preds{Matrix<double>(20, 4), Matrix<double>(20, 4)};
    for (Index i = 0; i < 20; ++i)
      for (Index j = 0; j < 4; ++j) {
        preds.scores(i, j) = static_cast<double>(rng() % 7);
        preds.labels(i, j) = rng() % 2 ? 1.0 : 0.0;
      }
    for (Index j = 0; j < 4; ++j) preds.labels(j, j) = 1.0;
    double total = 0;
    for (Index j = 0; j < 4; ++j) {
      oracle::Row s;
      std::vector<int> l;
      for (Index i = 0; i < 20; ++i) {
        s.push_back(preds.scores(i, j));
        l.push_back(static_cast<int>(preds.labels(i, j)));
      }
      total += oracle::average_precision(s, l);
    }
    ap_mismatch += mean_ap(preds).map != total / 4;
  }
  o.require(ap_mismatch == 0, std::to_string(ap_mismatch) + " AP/mAP mismatches");
  o.detail << "bilinear err " << bilinear_err << ", self-attention err " << attention_err << ", BCE err " << bce_err
           << ", AP/mAP mismatches " << ap_mismatch << "/1050";
  return o;
}

Outcome closed_forms() {
  Outcome o;
  Tape<double> tape;
  const double asl_half = asl(tape.constant(TensorD::vector({0.5})), TensorD::vector({1}), AslConfig{0.0, 2.0, 0.05}).value().item();
  o.require(std::abs(asl_half - std::log(2.0)) < 1e-12, "asl(p=0.5)");

  Rng rng(3);
  auto a = tape.constant(uniform_tensor<double>(Shape{5, 3}, rng));
  const TensorD y = TensorD::vector({1, 0, 1});
  auto theta = source_distribution(tape.constant(uniform_tensor<double>(Shape{5, 3}, rng)), y);
  auto beta = target_distribution(tape.constant(y));
  const double ct = ct_loss(forward_plan(a, theta), backward_plan(a, beta), tape.constant(TensorD(Shape{5, 3}, 1.0))).value().item();
  o.require(std::abs(ct - 2.0) < 1e-12, "ct_loss with unit cost");

  const auto b = target_distribution(tape.constant(TensorD::vector({1, 0, 0}))).value();
  o.require(std::abs(b[0] - 0.5761) < 1e-4 && std::abs(b[1] - 0.2119) < 1e-4 && std::abs(b[2] - 0.2119) < 1e-4, "target_distribution");
  o.detail << "asl=" << asl_half << " ct=" << ct << " beta=[" << b[0] << ", " << b[1] << ", " << b[2] << "]";
  return o;
}

double train_map(const TrainConfig& cfg, const SyntheticSplits& data) {
  return train(cfg, data.train, &data.test).test->report.ap.map;
}

Outcome end_to_end(const SyntheticSplits& data) {
  Outcome o;
  const TrainConfig cfg;
  const auto t0 = Clock::now();
  const double map = train_map(cfg, data);
  const double secs = seconds_since(t0);
  o.require(cfg.epochs <= 50, "epochs");
  o.require(map >= 0.90, "test mAP " + std::to_string(map));
  o.require(secs < 600, "runtime " + std::to_string(secs) + " s");
  o.detail << "test mAP " << map << " after " << cfg.epochs << " epochs, " << secs << " s";
  return o;
}

Outcome ablation(const SyntheticSplits& data) {
  Outcome o;
  double full = 0, no_ot = 0, no_sa_ot = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    full += train_map(cfg, data) / 3;
    cfg.ablation.disable_transport = true;
    no_ot += train_map(cfg, data) / 3;
    cfg.ablation.disable_self_attention = true;
    no_sa_ot += train_map(cfg, data) / 3;
  }
  o.require(full >= no_ot + 0.01, "full - disable-ot = " + std::to_string(full - no_ot));
  o.require(no_ot >= no_sa_ot + 0.01, "disable-ot - disable-self-attn+disable-ot = " + std::to_string(no_ot - no_sa_ot));
  o.detail << "mean mAP over 3 seeds: full " << full << ", disable-ot " << no_ot << ", disable-self-attn+disable-ot " << no_sa_ot;
  return o;
}

Outcome determinism(const SyntheticSplits& data) {
  Outcome o;
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 7;
  std::ostringstream log_a, log_b;
  const TrainResult a = train(cfg, data.train, &data.test, &log_a);
  const TrainResult b = train(cfg, data.train, &data.test, &log_b);
  const auto bytes_a = serialize(a.checkpoint), bytes_b = serialize(b.checkpoint);
  o.require(log_a.str() == log_b.str(), "logs differ");
  o.require(bytes_a == bytes_b, "checkpoints differ");
  o.detail << "5-epoch runs: " << log_a.str().size() << " log bytes and " << bytes_a.size() << " checkpoint bytes identical";
  return o;
}

Outcome format_fixtures(const SyntheticSplits& data) {
  Outcome o;
  const auto path = (std::filesystem::temp_directory_path() / "sarl_acceptance_dataset.bin").string();
  save_dataset(path, data.test);
  const Dataset back = load_dataset(path);
  std::remove(path.c_str());
  o.require(back == data.test && serialize(back) == serialize(data.test), "dataset round trip");

  Vector<double> v(4);
  v << -1.0, 0.0, 0.5, 1.0;
  const std::vector<std::uint8_t> fixture = {'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 0, 128, 191, 255};
  o.require(heatmap_pgm(v, 2, 2) == fixture, "PGM 2x2 fixture");

  TrainConfig cfg;
  cfg.epochs = 2;
  const Checkpoint ckpt = train(cfg, data.train).checkpoint;
  const auto cpath = (std::filesystem::temp_directory_path() / "sarl_acceptance_ckpt.bin").string();
  save_checkpoint(cpath, ckpt);
  const Checkpoint loaded = load_checkpoint(cpath);
  std::remove(cpath.c_str());
  const EvalResult before = evaluate(ckpt, data.test), after = evaluate(loaded, data.test);
  o.require(before.predictions.scores == after.predictions.scores &&
                format_key_values(before.report) == format_key_values(after.report),
            "checkpoint evaluate differs");
  o.detail << "dataset, PGM and checkpoint round trips exact";
  return o;
}

}  // namespace

int main() {
  const SyntheticSplits data = generate(SyntheticConfig{});
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"transport invariants", transport_invariants},
      {"oracle equivalence", oracle_equivalence},
      {"closed-form values", closed_forms},
      {"end-to-end learning", [&] { return end_to_end(data); }},
      {"ablation direction", [&] { return ablation(data); }},
      {"determinism", [&] { return determinism(data); }},
      {"format fixtures", [&] { return format_fixtures(data); }},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
