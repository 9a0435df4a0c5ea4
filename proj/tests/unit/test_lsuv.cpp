#include <doctest.h>

#include <cmath>

#include "bprnn/errors.hpp"
#include "bprnn/lsuv.hpp"
#include "bprnn/random.hpp"
#include "bprnn/rnn.hpp"
#include "bprnn/stats.hpp"
#include "bprnn/trainer.hpp"

using namespace bprnn;

namespace {

StackConfig stack(std::size_t depth, std::size_t width, ActivationSpec act, bool skips = true) {
  StackConfig cfg;
  cfg.depth = depth;
  cfg.width = width;
  cfg.embedding_dim = width;
  cfg.activation = act;
  cfg.skip_connections = skips;
  cfg.vocab_size = 256;
  return cfg;
}

// One step from N(0,1) states with 256 distinct symbols, so every column of
// the input is an independent N(0,1) embedding draw.
StackState one_step(const Model& m, Rng& rng) {
  StackState s;
  for (std::size_t i = 0; i < m.config.depth; ++i) {
    s.h.push_back(sample_gaussian(rng, m.config.width, 256, 0.0, 1.0));
  }
  std::vector<int> tokens(256);
  for (int k = 0; k < 256; ++k) tokens[static_cast<std::size_t>(k)] = k;
  return forward_step(m, s, tokens, DropoutMasks::none(), 1).state;
}

}  // namespace

TEST_CASE("4-layer plain relu stack converges quickly") {
  Model m;
  {
    Rng rng(7);
    m = make_model(stack(4, 32, ActivationSpec::relu()), rng);
  }
  Rng rng(7);
  const auto reports = lsuv_init_stack(m, LsuvConfig{}, rng);
  REQUIRE(reports.size() == 4);
  for (const auto& r : reports) {
    CAPTURE(r.layer_index);
    CHECK(r.iterations <= 10);
    CHECK(std::abs(r.final_variance - 1.0) <= 0.02);
  }
}

TEST_CASE("every activation reaches unit variance at depth") {
  for (ActivationSpec act : {ActivationSpec::relu(true), ActivationSpec::leaky_relu(0.01),
                             ActivationSpec::elu(1.0, true), ActivationSpec::selu(true),
                             ActivationSpec::elu(1.0)}) {
    CAPTURE(act.name());
    Rng rng(21);
    Model m = make_model(stack(24, 32, act), rng);
    for (const auto& r : lsuv_init_stack(m, LsuvConfig{}, rng)) {
      CHECK(std::abs(r.final_variance - 1.0) <= 0.02);
    }
  }
}

TEST_CASE("W and U are scaled in synchrony") {
  Rng rng(5);
  Model m = make_model(stack(8, 32, ActivationSpec::elu(1.0, true)), rng);
  const Model before = m;
  const auto reports = lsuv_init_stack(m, LsuvConfig{}, rng);
  for (std::size_t i = 1; i <= 8; ++i) {
    const double r0 = frobenius_norm(before.layer(i).W) / frobenius_norm(before.layer(i).U);
    const double r1 = frobenius_norm(m.layer(i).W) / frobenius_norm(m.layer(i).U);
    CHECK(std::abs(r1 - r0) <= 1e-9 * r0);
    CHECK(reports[i - 1].w_scale == reports[i - 1].u_scale);
    CHECK(m.layer(i).b == before.layer(i).b);
  }
}

TEST_CASE("a layer already at the target is left alone") {
  // identity activation, variance of {-1, 0, 1} is exactly 1
  Tensor2D W = Tensor2D::from_rows({{1}});
  const Tensor2D x = Tensor2D::from_rows({{-1, 0, 1}});
  CHECK(lsuv_single_layer(ActivationSpec::leaky_relu(1.0), W, x, LsuvConfig{}) == 0);
  CHECK(W == Tensor2D::from_rows({{1}}));

  // the same probe twice: the second pass finds nothing to do
  Rng r1(3);
  Model m = make_model(stack(1, 32, ActivationSpec::elu(1.0, true)), r1);
  Rng a(8);
  lsuv_init_stack(m, LsuvConfig{}, a);
  const Model settled = m;
  Rng b(8);
  const auto again = lsuv_init_stack(m, LsuvConfig{}, b);
  CHECK(again[0].iterations == 0);
  CHECK(m == settled);
}

TEST_CASE("non-convergence names the layer") {
  Rng rng(2);
  Model m = make_model(stack(3, 32, ActivationSpec::elu()), rng);
  for (auto& l : m.layers) {
    l.W = scale(l.W, 50.0);
    l.U = scale(l.U, 50.0);
  }
  LsuvConfig cfg;
  cfg.max_iterations = 1;
  cfg.update = LsuvConfig::Update::Standard;
  cfg.tolerance = 1e-6;
  try {
    lsuv_init_stack(m, cfg, rng);
    FAIL("expected InitializationError");
  } catch (const InitializationError& e) {
    CHECK(e.layer() == 1);
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("zero output variance is a degenerate layer") {
  Tensor2D W(4, 4, 0.0);
  Rng rng(1);
  const Tensor2D x = sample_gaussian(rng, 4, 16, 0, 1);
  CHECK_THROWS_AS(lsuv_single_layer(ActivationSpec::relu(), W, x, LsuvConfig{}),
                  DegenerateLayerError);
}

TEST_CASE("lsuv config is validated") {
  LsuvConfig cfg;
  cfg.tolerance = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = LsuvConfig{};
  cfg.probe_batch = 1;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = LsuvConfig{};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("gamma rebalance closed forms") {
  Rng rng(6);
  const Tensor2D W = sample_gaussian(rng, 5, 5, 0, 1);
  const Tensor2D U = sample_gaussian(rng, 5, 3, 0, 1);
  auto [w5, u5] = gamma_rebalance(W, U, 0.5);
  CHECK(w5 == W);
  CHECK(u5 == U);

  auto [w1, u1] = gamma_rebalance(W, U, 1.0);
  for (std::size_t k = 0; k < W.size(); ++k) CHECK(w1.values()[k] == doctest::Approx(W.values()[k] * std::sqrt(2.0)).epsilon(1e-15));
  for (double u : u1.values()) CHECK(u == 0.0);

  auto [wq, uq] = gamma_rebalance(Tensor2D::from_rows({{2}}), Tensor2D::from_rows({{2}}), 0.25);
  CHECK(wq(0, 0) == doctest::Approx(1.41421356).epsilon(1e-8));
  CHECK(uq(0, 0) == doctest::Approx(2.44948974).epsilon(1e-8));

  CHECK_THROWS_AS(gamma_rebalance(W, U, -0.1), ParameterError);
  CHECK_THROWS_AS(gamma_rebalance(W, U, 1.1), ParameterError);
}

TEST_CASE("gamma rebalance preserves pre-activation variance") {
  Rng rng(31);
  const std::size_t n = 128, batch = 2000;
  const Tensor2D W = sample_gaussian(rng, n, n, 0, 1.0 / std::sqrt(double(n)));
  const Tensor2D U = sample_gaussian(rng, n, n, 0, 1.0 / std::sqrt(double(n)));
  const Tensor2D h = sample_gaussian(rng, n, batch, 0, 1);
  const Tensor2D x = sample_gaussian(rng, n, batch, 0, 1);
  const double ref = variance(add(matmul(W, h), matmul(U, x)));
  for (double g : {0.1, 0.5, 0.9}) {
    auto [w, u] = gamma_rebalance(W, U, g);
    const double v = variance(add(matmul(w, h), matmul(u, x)));
    CHECK(std::abs(v - ref) <= 0.05 * ref);
  }
}

TEST_CASE("initialized stack has unit variance at the top") {
  Rng rng(8);
  const Model m = initialize_model(stack(8, 64, ActivationSpec::elu(1.0, true)), InitConfig{}, rng);
  Rng probe(9);
  const StackState s = one_step(m, probe);
  const double v = variance(s.h[7]);
  CHECK(v >= 0.9);
  CHECK(v <= 1.1);
}

TEST_CASE("bipolar elu keeps layer means inside alpha through 36 layers") {
  Rng rng(10);
  const Model m = initialize_model(stack(36, 64, ActivationSpec::elu(1.0, true)), InitConfig{}, rng);
  Rng probe(11);
  const StackState s = one_step(m, probe);
  for (std::size_t i = 0; i < 36; ++i) {
    CAPTURE(i + 1);
    CHECK(std::abs(mean(s.h[i])) <= 1.0);
  }
}
