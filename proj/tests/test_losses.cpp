#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "sarl/gradcheck.hpp"
#include "sarl/losses.hpp"
#include "sarl/random.hpp"
#include "test_util.hpp"

using namespace sarl;
using TensorD = Tensor<double>;
using VarD = Var<double>;
using Inputs = std::vector<VarD>;

namespace {

double asl_value(const oracle::Row& p, const oracle::Row& y, const AslConfig& cfg) {
  Tape<double> tape;
  return asl(tape.constant(testutil::to_tensor(p)), testutil::to_tensor(y), cfg).value().item();
}

oracle::Row random_labels(std::size_t c, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  oracle::Row y(c);
  for (auto& v : y) v = coin(rng) ? 1.0 : 0.0;
  return y;
}

}  // namespace

TEST_CASE("asl closed forms") {
  const AslConfig cfg;
  CHECK(asl_value({1.0}, {1}, cfg) < 1e-6);
  CHECK(asl_value({0.04}, {0}, cfg) == 0.0);
  CHECK(asl_value({0.05}, {0}, cfg) == 0.0);
  CHECK(std::abs(asl_value({0.5}, {1}, cfg) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(asl_value({0.5}, {1}, cfg) - 0.6931) < 1e-4);
  // Mean over classes, not sum.
  CHECK(std::abs(asl_value({0.5, 0.5}, {1, 1}, cfg) - std::log(2.0)) < 1e-15);
}

TEST_CASE("asl is non-negative and monotone in p") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> gamma(0.0, 4.0), clip(0.0, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    AslConfig cfg{gamma(rng), gamma(rng), clip(rng)};
    double prev_pos = 1e300, prev_neg = -1;
    for (int i = 0; i <= 200; ++i) {
      const double p = i / 200.0;
      const double pos = asl_value({p}, {1}, cfg), neg = asl_value({p}, {0}, cfg);
      CHECK(pos >= 0);
      CHECK(neg >= 0);
      CHECK(pos <= prev_pos);
      CHECK(neg >= prev_neg);
      prev_pos = pos;
      prev_neg = neg;
    }
  }
}

TEST_CASE("asl matches its oracle and reduces to BCE") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    oracle::Row p(7);
    for (auto& v : p) v = u(rng);
    oracle::Row y = random_labels(7, rng);
    const AslConfig cfg;
    CHECK(std::abs(asl_value(p, y, cfg) - oracle::asl(p, y, cfg.gamma_pos, cfg.gamma_neg, cfg.clip)) < 1e-12);
    CHECK(std::abs(asl_value(p, y, AslConfig{0, 0, 0}) - oracle::bce(p, y)) < 1e-12);
  }
}

TEST_CASE("asl rejects bad configs and shapes") {
  CHECK_THROWS_AS((AslConfig{-1, 2, 0.05}.validate()), ConfigError);
  CHECK_THROWS_AS((AslConfig{0, 2, 1.0}.validate()), ConfigError);
  CHECK_NOTHROW(AslConfig{}.validate());
  CHECK_THROWS_AS((LossWeights{-0.1, 0.5}.validate()), ConfigError);
  Tape<double> tape;
  CHECK_THROWS_AS(asl(tape.constant(TensorD(Shape{3}, 0.5)), TensorD(Shape{2}), AslConfig{}), DimensionError);
}

TEST_CASE("semantic_map_loss") {
  const AslConfig cfg;
  Tape<double> tape;
  SUBCASE("saturated maxima give near-zero loss") {
    // Class 0 positive with max +20, class 1 negative with max -20.
    TensorD m(Shape{3, 2}, {20, -25, -5, -20, 3, -30});
    CHECK(semantic_map_loss(tape.constant(m), TensorD::vector({1, 0}), cfg).value().item() < 1e-7);
  }
  SUBCASE("one patch reduces to asl of the row") {
    Rng rng(13);
    TensorD m = uniform_tensor<double>(Shape{1, 5}, rng, -3, 3);
    TensorD y = TensorD::vector({1, 0, 0, 1, 0});
    const double a = semantic_map_loss(tape.constant(m), y, cfg).value().item();
    const double b = asl(sigmoid(tape.constant(m.reshaped(Shape{5}))), y, cfg).value().item();
    CHECK(a == b);
  }
  SUBCASE("max-then-asl oracle and patch permutation") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
      auto m = oracle::random_grid(6, 4, rng, -4, 4);
      auto y = random_labels(4, rng);
      oracle::Row probs(4);
      for (std::size_t c = 0; c < 4; ++c) {
        double mx = -1e300;
        for (const auto& row : m) mx = std::max(mx, row[c]);
        probs[c] = oracle::sigmoid(mx);
      }
      const double got = semantic_map_loss(tape.constant(testutil::to_tensor(m)), testutil::to_tensor(y), cfg).value().item();
      CHECK(std::abs(got - oracle::asl(probs, y, cfg.gamma_pos, cfg.gamma_neg, cfg.clip)) < 1e-12);
      std::reverse(m.begin(), m.end());
      std::swap(m[0], m[3]);
      const double permuted =
          semantic_map_loss(tape.constant(testutil::to_tensor(m)), testutil::to_tensor(y), cfg).value().item();
      CHECK(permuted == got);
    }
  }
}

TEST_CASE("classification_loss") {
  const AslConfig cfg;
  Tape<double> tape;
  CHECK(classification_loss(tape.constant(TensorD::vector({20, -20, 20})), TensorD::vector({1, 0, 1}), cfg).value().item() <
        1e-7);
  CHECK(std::abs(classification_loss(tape.constant(TensorD::vector({0})), TensorD::vector({1}), cfg).value().item() -
                 0.6931) < 1e-4);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 20; ++trial) {
    oracle::Row z(6), p(6);
    for (std::size_t i = 0; i < 6; ++i) p[i] = oracle::sigmoid(z[i] = u(rng));
    auto y = random_labels(6, rng);
    const double got = classification_loss(tape.constant(testutil::to_tensor(z)), testutil::to_tensor(y), cfg).value().item();
    CHECK(std::abs(got - oracle::asl(p, y, cfg.gamma_pos, cfg.gamma_neg, cfg.clip)) < 1e-12);
  }
}

TEST_CASE("total_loss weights") {
  CHECK(total_loss(1.3, 2, 3, LossWeights{0, 0}) == 1.3);
  CHECK(std::abs(total_loss(1, 2, 3, LossWeights{0.04, 0.5}) - 2.58) < 1e-12);
  CHECK(std::abs(total_loss(1, 2, 3, LossWeights{0.2, 0.5}) - 2.9) < 1e-12);
  Tape<double> tape;
  auto v = total_loss(tape.constant(TensorD::scalar(1)), tape.constant(TensorD::scalar(2)), tape.constant(TensorD::scalar(3)),
                      LossWeights{0.04, 0.5});
  CHECK(std::abs(v.value().item() - 2.58) < 1e-12);
}

TEST_CASE("loss gradients") {
  Rng rng(16);
  const AslConfig cfg{1.0, 2.0, 0.05};
  const TensorD y = TensorD::vector({1, 0, 1, 0, 0});

  auto asl_fn = [&](Tape<double>&, const Inputs& v) { return asl(sigmoid(v[0]), y, cfg); };
  CHECK(gradient_check(asl_fn, {uniform_tensor<double>(Shape{5}, rng, -2, 2)}).passed(1e-4));

  auto cls_fn = [&](Tape<double>&, const Inputs& v) { return classification_loss(v[0], y, AslConfig{}); };
  CHECK(gradient_check(cls_fn, {uniform_tensor<double>(Shape{5}, rng, -2, 2)}).passed(1e-4));

  // Distinct values keep the per-class maximum away from ties.
  TensorD m(Shape{4, 5});
  for (Index i = 0; i < m.size(); ++i) m[i] = std::sin(1.7 * static_cast<double>(i) + 0.3) * 2;
  auto map_fn = [&](Tape<double>&, const Inputs& v) { return semantic_map_loss(v[0], y, AslConfig{}); };
  CHECK(gradient_check(map_fn, {m}).passed(1e-4));

  auto total_fn = [&](Tape<double>&, const Inputs& v) {
    return total_loss(classification_loss(v[0], y, AslConfig{}), semantic_map_loss(v[1], y, AslConfig{}), sum(mul(v[0], v[0])),
                      LossWeights{0.2, 0.5});
  };
  CHECK(gradient_check(total_fn, {uniform_tensor<double>(Shape{5}, rng, -2, 2), m}).passed(1e-4));
}
