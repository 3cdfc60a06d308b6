#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "oracles.hpp"
#include "sarl/gradcheck.hpp"
#include "sarl/head.hpp"
#include "test_util.hpp"

using namespace sarl;
using TensorD = Tensor<double>;
using VarD = Var<double>;
using Inputs = std::vector<VarD>;

namespace {

ClassifierParams<double> classifier(Tape<double>& tape, const TensorD& w, const TensorD& b) {
  return {tape.constant(w), tape.constant(b)};
}

double aggregate_one(const TensorD& scores) {
  Tape<double> tape;
  TensorD eye = TensorD::from_matrix(Matrix<double>::Identity(scores.dim(1), scores.dim(1)));
  return region_score_aggregate(tape.constant(scores), classifier(tape, eye, TensorD(Shape{scores.dim(1)}))).value()[0];
}

ModelConfig tiny_precomputed() {
  ModelConfig cfg;
  cfg.encoder.mode = EncoderMode::precomputed;
  cfg.encoder.input_height = 2;
  cfg.encoder.input_width = 2;
  cfg.encoder.feature_dim = 8;
  cfg.classes = 3;
  cfg.label_dim = 4;
  cfg.heads = 2;
  cfg.joint_dim = 4;
  cfg.output_dim = 4;
  return cfg;
}

// Biases are zero after init; give them values so the oracle sees them.
ModelBundle<double> perturbed_model(const ModelConfig& cfg, std::uint64_t seed) {
  auto m = init_model<double>(cfg, seed);
  Rng rng(seed + 100);
  for (auto& e : m.params) {
    if (e.name.ends_with("bias")) e.value = uniform_tensor<double>(e.value.shape(), rng, -0.5, 0.5);
    if (e.name == "labels.embedding") e.value = uniform_tensor<double>(e.value.shape(), rng);
  }
  return m;
}

oracle::Grid grid(const ModelBundle<double>& m, const std::string& name) {
  const auto& t = m.params.at(name);
  if (t.rank() == 1) return {testutil::to_row(t)};
  return testutil::to_grid(t);
}

oracle::Row row(const ModelBundle<double>& m, const std::string& name) { return testutil::to_row(m.params.at(name)); }

oracle::Grid transpose(const oracle::Grid& g) {
  oracle::Grid t = oracle::zeros(g.front().size(), g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j) t[j][i] = g[i][j];
  return t;
}

oracle::Grid row_softmax(const oracle::Grid& g) {
  oracle::Grid out;
  for (const auto& r : g) out.push_back(oracle::softmax(r));
  return out;
}

struct OracleOutputs {
  oracle::Row z;
  double cls = 0, map = 0, transport = 0, total = 0;
};

// Straight-line recomputation of the whole head from the module oracles.
OracleOutputs oracle_forward(const ModelBundle<double>& m, const oracle::Grid& input, const oracle::Row& y,
                             const Objective& obj) {
  const auto& cfg = m.config;
  const std::size_t classes = static_cast<std::size_t>(cfg.classes);
  auto f = oracle::self_attention(input, grid(m, "attention.query"), grid(m, "attention.key"), grid(m, "attention.value"),
                                  static_cast<std::size_t>(cfg.heads));
  oracle::Row global(f.front().size(), 0.0);
  for (const auto& r : f)
    for (std::size_t j = 0; j < r.size(); ++j) global[j] += r[j] / static_cast<double>(f.size());
  auto fs = oracle::fuse(global, grid(m, "labels.embedding"), grid(m, "fusion.weight"), row(m, "fusion.bias"));
  auto a = oracle::bilinear(f, fs, grid(m, "transport.u"), grid(m, "transport.v"), grid(m, "transport.proj"),
                            row(m, "transport.bias"), grid(m, "transport.out"));
  auto b = row_softmax(a);
  auto fr = oracle::matmul(b, fs);
  auto scores = oracle::matmul(fr, grid(m, "classifier.weight"));
  const auto cb = row(m, "classifier.bias");
  for (auto& r : scores)
    for (std::size_t c = 0; c < classes; ++c) r[c] += cb[c];
  auto weights = transpose(row_softmax(transpose(scores)));

  OracleOutputs out;
  out.z.assign(classes, 0.0);
  for (std::size_t p = 0; p < scores.size(); ++p)
    for (std::size_t c = 0; c < classes; ++c) out.z[c] += weights[p][c] * scores[p][c];

  const auto& asl = obj.asl;
  oracle::Row pz(classes);
  for (std::size_t c = 0; c < classes; ++c) pz[c] = oracle::sigmoid(out.z[c]);
  out.cls = oracle::asl(pz, y, asl.gamma_pos, asl.gamma_neg, asl.clip);

  auto sm = oracle::matmul(f, grid(m, "semantic_map.weight"));
  oracle::Row pm(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double mx = -1e300;
    for (const auto& r : sm) mx = std::max(mx, r[c]);
    pm[c] = oracle::sigmoid(mx);
  }
  out.map = oracle::asl(pm, y, asl.gamma_pos, asl.gamma_neg, asl.clip);

  double ysum = 0;
  for (double v : y) ysum += v;
  oracle::Row mixed(sm.size(), 0.0);
  for (std::size_t p = 0; p < sm.size(); ++p)
    for (std::size_t c = 0; c < classes; ++c) mixed[p] += sm[p][c] * y[c] / ysum;
  auto theta = oracle::softmax(mixed);
  auto beta = oracle::softmax(y);
  auto col = transpose(row_softmax(transpose(a)));
  oracle::Grid fwd = b, bwd = col;
  for (std::size_t p = 0; p < fwd.size(); ++p)
    for (std::size_t c = 0; c < classes; ++c) {
      fwd[p][c] *= theta[p];
      bwd[p][c] *= beta[c];
    }
  out.transport = oracle::ct_loss(fwd, bwd, oracle::cosine_cost(f, fs));
  out.total = out.cls + obj.weights.lambda1 * out.map + obj.weights.lambda2 * out.transport;
  return out;
}

}  // namespace

TEST_CASE("region_score_aggregate closed forms") {
  Tape<double> tape;
  Rng rng(21);
  SUBCASE("identical rows give the common score row") {
    TensorD row = uniform_tensor<double>(Shape{1, 5}, rng);
    TensorD rep(Shape{4, 5});
    for (Index p = 0; p < 4; ++p)
      for (Index j = 0; j < 5; ++j) rep(p, j) = row(0, j);
    TensorD w = uniform_tensor<double>(Shape{5, 3}, rng), b = uniform_tensor<double>(Shape{3}, rng);
    auto z = region_score_aggregate(tape.constant(rep), classifier(tape, w, b)).value();
    Vector<double> expect = (row.matrix() * w.matrix()).transpose() + b.data();
    CHECK((z.data() - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("one patch") {
    TensorD rep = uniform_tensor<double>(Shape{1, 4}, rng);
    TensorD w = uniform_tensor<double>(Shape{4, 2}, rng), b = uniform_tensor<double>(Shape{2}, rng);
    auto z = region_score_aggregate(tape.constant(rep), classifier(tape, w, b)).value();
    Vector<double> expect = (rep.matrix() * w.matrix()).transpose() + b.data();
    CHECK((z.data() - expect).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("two patches, scores [ln 3 + s, s]") {
    for (double s : {0.0, -2.5, 1.25, 7.0}) {
      const double z = aggregate_one(TensorD(Shape{2, 1}, {std::log(3.0) + s, s}));
      CHECK(std::abs(z - (0.75 * (std::log(3.0) + s) + 0.25 * s)) < 1e-12);
    }
    CHECK(std::abs(aggregate_one(TensorD(Shape{2, 1}, {std::log(3.0), 0.0})) - 0.8240) < 1e-4);
  }
  SUBCASE("no patches is rejected") {
    CHECK_THROWS_AS(region_score_aggregate(tape.constant(TensorD(Shape{0, 2})), classifier(tape, TensorD(Shape{2, 1}), TensorD(Shape{1}))),
                    ContractError);
  }
}

TEST_CASE("region_score_aggregate properties") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    Tape<double> tape;
    TensorD rep = uniform_tensor<double>(Shape{5, 4}, rng, -2, 2);
    TensorD w = uniform_tensor<double>(Shape{4, 3}, rng), b = uniform_tensor<double>(Shape{3}, rng);
    auto z = region_score_aggregate(tape.constant(rep), classifier(tape, w, b)).value();

    // Per-class patch weights are on the simplex.
    TensorD scores = TensorD::from_matrix((rep.matrix() * w.matrix()).rowwise() + b.data().transpose());
    TensorD weights = softmax_values(scores, 0);
    for (Index c = 0; c < 3; ++c) {
      double s = 0;
      for (Index p = 0; p < 5; ++p) {
        CHECK(weights(p, c) >= 0);
        s += weights(p, c);
      }
      CHECK(std::abs(s - 1) < 1e-9);
    }

    // Patch permutation leaves z unchanged.
    TensorD perm(Shape{5, 4});
    const Index order[] = {3, 0, 4, 1, 2};
    for (Index p = 0; p < 5; ++p)
      for (Index j = 0; j < 4; ++j) perm(p, j) = rep(order[p], j);
    auto zp = region_score_aggregate(tape.constant(perm), classifier(tape, w, b)).value();
    CHECK((z.data() - zp.data()).cwiseAbs().maxCoeff() < 1e-12);

    // Shifting one class's scores by s shifts its logit by s and nothing else.
    const double s = 1.5 * trial - 10;
    TensorD b2 = b;
    b2[1] += s;
    auto zs = region_score_aggregate(tape.constant(rep), classifier(tape, w, b2)).value();
    CHECK(std::abs(zs[1] - z[1] - s) < 1e-10);
    CHECK(zs[0] == z[0]);
    CHECK(zs[2] == z[2]);
  }
}

TEST_CASE("zero network predicts zero logits") {
  ModelConfig cfg;
  auto m = init_model<double>(cfg, 5);
  for (auto& e : m.params) e.value.data().setZero();
  Rng rng(23);
  Tape<double> tape;
  BoundParameters<double> p(tape, m.params, false);
  auto out = forward(p, cfg, tape.constant(uniform_tensor<double>(cfg.encoder.input_shape(), rng)), Mode::infer);
  CHECK(out.logits.value().data().isZero());
  CHECK(out.logits.size() == cfg.classes);
}

TEST_CASE("init_model shapes and determinism") {
  ModelConfig cfg;
  auto a = init_model<double>(cfg, 9), b = init_model<double>(cfg, 9), c = init_model<double>(cfg, 10);
  CHECK(a.params == b.params);
  CHECK_FALSE(a.params == c.params);
  CHECK(a.params.at("encoder.conv0.weight").shape() == Shape{27, 16});
  CHECK(a.params.at("encoder.conv1.weight").shape() == Shape{144, 32});
  CHECK(a.params.at("attention.query").shape() == Shape{32, 32});
  CHECK(a.params.at("labels.embedding").shape() == Shape{6, 16});
  CHECK(a.params.at("fusion.weight").shape() == Shape{48, 32});
  CHECK(a.params.at("transport.u").shape() == Shape{32, 16});
  CHECK(a.params.at("transport.out").shape() == Shape{16, 1});
  CHECK(a.params.at("classifier.weight").shape() == Shape{32, 6});
  CHECK(a.params.at("fusion.bias").data().isZero());

  ModelConfig bad = cfg;
  bad.heads = 5;
  CHECK_THROWS_AS(init_model<double>(bad, 1), ConfigError);
}

TEST_CASE("train-mode outputs satisfy the module invariants") {
  ModelConfig cfg;
  auto m = perturbed_model(cfg, 31);
  Rng rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    Tape<double> tape;
    BoundParameters<double> p(tape, m.params, true);
    TensorD y(Shape{cfg.classes});
    y[trial % cfg.classes] = 1;
    y[(trial * 3 + 1) % cfg.classes] = 1;
    auto out = forward(p, cfg, tape.constant(uniform_tensor<double>(cfg.encoder.input_shape(), rng)), Mode::train, &y);
    const auto& theta = out.theta.value();
    const auto& beta = out.beta.value();
    CHECK(std::abs(theta.data().sum() - 1) < 1e-9);
    CHECK(std::abs(beta.data().sum() - 1) < 1e-9);
    CHECK(theta.data().minCoeff() >= 0);
    const auto fwd = out.forward_plan->plan.value().matrix();
    const auto bwd = out.backward_plan->plan.value().matrix();
    CHECK((fwd.rowwise().sum() - theta.data()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((bwd.colwise().sum().transpose() - beta.data()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(fwd.minCoeff() >= 0);
    CHECK(bwd.minCoeff() >= 0);
    CHECK(out.cost.value().data().minCoeff() >= 0);
    CHECK(out.cost.value().data().maxCoeff() <= 2);
    CHECK(out.loss_transport.value().item() >= 0);
    const auto attn = out.attention.value().matrix();
    CHECK((attn.rowwise().sum().array() - 1).abs().maxCoeff() < 1e-9);
    tape.backward(out.loss_total);
    CHECK(p["classifier.weight"].grad().all_finite());
  }
}

TEST_CASE("inference is label-free and matches train-mode logits") {
  ModelConfig cfg;
  auto m = perturbed_model(cfg, 32);
  Rng rng(25);
  TensorD x = uniform_tensor<double>(cfg.encoder.input_shape(), rng);
  Tape<double> tape;
  BoundParameters<double> p(tape, m.params, false);
  auto infer = forward(p, cfg, tape.constant(x), Mode::infer);
  CHECK_FALSE(infer.theta.valid());
  CHECK_FALSE(infer.beta.valid());
  CHECK_FALSE(infer.loss_total.valid());
  CHECK_FALSE(infer.forward_plan.has_value());
  TensorD y = TensorD::vector({0, 1, 0, 0, 1, 0});
  auto train = forward(p, cfg, tape.constant(x), Mode::train, &y);
  CHECK(infer.logits.value() == train.logits.value());
  CHECK_THROWS_AS(forward(p, cfg, tape.constant(x), Mode::train), ContractError);
  TensorD none(Shape{cfg.classes});
  CHECK_THROWS_AS(forward(p, cfg, tape.constant(x), Mode::train, &none), ContractError);
  CHECK_THROWS_AS(forward(p, cfg, tape.constant(TensorD(Shape{4, 4, 3})), Mode::infer), ConfigError);
}

TEST_CASE("ablation paths") {
  ModelConfig cfg = tiny_precomputed();
  auto m = perturbed_model(cfg, 33);
  Rng rng(26);
  TensorD x = uniform_tensor<double>(cfg.encoder.input_shape(), rng);
  TensorD y = TensorD::vector({1, 0, 1});

  SUBCASE("disable transport: classifier reads F and the loss is L_cls") {
    ModelConfig c = cfg;
    c.ablation.disable_transport = true;
    Tape<double> tape;
    BoundParameters<double> p(tape, m.params, true);
    auto out = forward(p, c, tape.constant(x), Mode::train, &y);
    CHECK_FALSE(out.theta.valid());
    CHECK_FALSE(out.beta.valid());
    CHECK_FALSE(out.loss_transport.valid());
    CHECK(out.loss_total.value().item() == out.loss_cls.value().item());
    CHECK(out.representation.value() == out.features.features.value());
  }
  SUBCASE("disable self-attention: features are the input") {
    ModelConfig c = cfg;
    c.ablation.disable_self_attention = true;
    Tape<double> tape;
    BoundParameters<double> p(tape, m.params, false);
    auto out = forward(p, c, tape.constant(x), Mode::infer);
    CHECK(out.features.features.value() == x);
  }
  SUBCASE("disable fusion: global feature is zero") {
    ModelConfig c = cfg;
    c.ablation.disable_gsp_fusion = true;
    Tape<double> tape;
    BoundParameters<double> p(tape, m.params, false);
    auto out = forward(p, c, tape.constant(x), Mode::infer);
    CHECK(out.global.value().data().isZero());
  }
}

TEST_CASE("full forward matches the composition oracle") {
  ModelConfig cfg = tiny_precomputed();
  const Objective obj{AslConfig{}, LossWeights{0.2, 0.5}};
  std::mt19937_64 orng(27);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto m = perturbed_model(cfg, 40 + seed);
    auto input = oracle::random_grid(4, 8, orng);
    oracle::Row y = {1, 0, static_cast<double>(seed % 2)};
    auto expect = oracle_forward(m, input, y, obj);

    Tape<double> tape;
    BoundParameters<double> p(tape, m.params, false);
    TensorD labels = testutil::to_tensor(y);
    auto out = forward(p, cfg, tape.constant(testutil::to_tensor(input)), Mode::train, &labels, obj);
    CHECK(testutil::max_abs_diff(out.logits.value(), expect.z) < 1e-9);
    CHECK(std::abs(out.loss_cls.value().item() - expect.cls) < 1e-9);
    CHECK(std::abs(out.loss_map.value().item() - expect.map) < 1e-9);
    CHECK(std::abs(out.loss_transport.value().item() - expect.transport) < 1e-9);
    CHECK(std::abs(out.loss_total.value().item() - expect.total) < 1e-9);
  }
}

TEST_CASE("full-model gradient check") {
  ModelConfig cfg = tiny_precomputed();
  auto m = perturbed_model(cfg, 50);
  Rng rng(28);
  std::vector<std::string> names;
  std::vector<TensorD> inputs;
  for (const auto& e : m.params) {
    names.push_back(e.name);
    inputs.push_back(e.value);
  }
  inputs.push_back(uniform_tensor<double>(cfg.encoder.input_shape(), rng));
  const TensorD y = TensorD::vector({1, 0, 1});
  const Objective obj{AslConfig{}, LossWeights{0.2, 0.5}};

  auto fn = [&](Tape<double>&, const Inputs& v) {
    BoundParameters<double> p(names, Inputs(v.begin(), v.end() - 1));
    return forward(p, cfg, v.back(), Mode::train, &y, obj).loss_total;
  };
  auto r = gradient_check(fn, inputs);
  INFO("worst input " << r.worst_input << " err " << r.max_rel_error);
  CHECK(r.passed(1e-3));
}

TEST_CASE("tiny-conv model gradient check") {
  ModelConfig cfg;
  cfg.encoder.feature_dim = 8;
  cfg.encoder.hidden_channels = 4;
  cfg.classes = 3;
  cfg.label_dim = 4;
  cfg.heads = 2;
  cfg.joint_dim = 4;
  cfg.output_dim = 4;
  auto m = perturbed_model(cfg, 51);
  Rng rng(29);
  std::vector<std::string> names;
  std::vector<TensorD> inputs;
  for (const auto& e : m.params) {
    names.push_back(e.name);
    inputs.push_back(e.value);
  }
  const TensorD x = uniform_tensor<double>(cfg.encoder.input_shape(), rng);
  const TensorD y = TensorD::vector({0, 1, 1});
  auto fn = [&](Tape<double>& tape, const Inputs& v) {
    BoundParameters<double> p(names, v);
    return forward(p, cfg, tape.constant(x), Mode::train, &y).loss_total;
  };
  auto r = gradient_check(fn, inputs);
  INFO("worst input " << names[r.worst_input] << " err " << r.max_rel_error);
  CHECK(r.passed(1e-3));
}
