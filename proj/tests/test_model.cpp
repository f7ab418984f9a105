#include <doctest.h>

#include <cmath>
#include <set>

#include "grad_check.hpp"
#include "vdet/model.hpp"

using namespace vdet;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 40;
  c.d_model = 16;
  c.n_heads = 4;
  c.n_layers = 2;
  c.d_ffn = 32;
  c.max_len = 24;
  c.dropout = 0.1;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = small_config();
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(ModelConfig::from_json(small_config().to_json()) == small_config());
}

TEST_CASE("parameter names are unique and complete") {
  const auto p = init_parameters(small_config(), 1);
  std::set<std::string> names;
  std::size_t count = 0;
  p.visit([&](const std::string& n, const Tensor& t) {
    names.insert(n);
    count += t.size();
  });
  CHECK(names.size() == 2 + 2 * 16 + 4);
  CHECK(names.count("layers.1.ffn.out.weight"));
  CHECK(count == p.parameter_count());
}

TEST_CASE("init is seeded") {
  const auto a = init_parameters(small_config(), 5), b = init_parameters(small_config(), 5);
  const auto c = init_parameters(small_config(), 6);
  CHECK(a.token_embedding == b.token_embedding);
  CHECK_FALSE(a.token_embedding == c.token_embedding);
  CHECK(a.layers[0].norm1_gain.data[0] == 1.0f);
  CHECK(a.layers[0].query_b.data[0] == 0.0f);
}

TEST_CASE("positive_probability is a stable softmax") {
  CHECK(positive_probability(0, 0) == doctest::Approx(0.5));
  CHECK(positive_probability(-3, 3) == doctest::Approx(1.0 / (1.0 + std::exp(-6.0))).epsilon(1e-12));
  CHECK(positive_probability(-3, 3) == doctest::Approx(0.9975).epsilon(1e-4));
  CHECK(positive_probability(0, 1000) == 1.0);
  CHECK(positive_probability(1000, 0) == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  for (const auto& e : vdet::testing::gradient_check(3)) {
    INFO(e.name);
    CHECK(e.relative < 1e-3);
  }
}

TEST_CASE("padding does not change logits") {
  const auto p = init_parameters(small_config(), 2);
  const std::vector<int> seq = {0, 5, 9, 17, 21, 1};
  const auto base = forward(p, Batch::from_sequences({seq}, 2));
  auto padded = Batch::from_sequences({seq, std::vector<int>(12, 7)}, 2);
  const auto longer = forward(p, padded);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(base.logits.data[k] - longer.logits.data[k]) < 1e-5);
}

TEST_CASE("dropout is seeded and off at inference") {
  const auto p = init_parameters(small_config(), 2);
  const auto batch = Batch::from_sequences({{0, 4, 8, 1}}, 2);
  Rng r1(9), r2(9);
  const auto a = forward(p, batch, ForwardOptions{true, &r1});
  const auto b = forward(p, batch, ForwardOptions{true, &r2});
  CHECK(a.logits == b.logits);
  const auto e1 = forward(p, batch), e2 = forward(p, batch);
  CHECK(e1.logits == e2.logits);
  CHECK_FALSE(a.logits == e1.logits);
  CHECK_THROWS_AS(forward(p, batch, ForwardOptions{true, nullptr}), Error);
}

TEST_CASE("attention rows are distributions over real tokens") {
  const auto p = init_parameters(small_config(), 4);
  const auto f = forward(p, Batch::from_sequences({{0, 3, 1}, {0, 3, 4, 5, 1}}, 2));
  const auto& a = f.trace.attention(0, 1);
  const std::size_t T = f.trace.seq_len;
  for (std::size_t h = 0; h < 4; ++h)
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < T; ++j) sum += a[(h * T + i) * T + j];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
      CHECK(a[(h * T + i) * T + 4] == 0.0f);
    }
}

TEST_CASE("backward rejects a stale trace and bad shapes") {
  auto p = init_parameters(small_config(), 4);
  const auto f = forward(p, Batch::from_sequences({{0, 3, 1}}, 2));
  const int label[] = {1};
  auto loss = loss_ce_smooth(f.logits, label, 0.1, {1.0, 1.0});
  ++p.version;
  CHECK_THROWS_WITH_AS(backward(p, f.trace, loss.dlogits), doctest::Contains("stale"), Error);
  --p.version;
  CHECK_THROWS_AS(backward(p, f.trace, Tensor({3, 2})), Error);
  CHECK_THROWS_AS(forward(p, Batch::from_sequences({std::vector<int>(30, 3)}, 2)), Error);
  CHECK_THROWS_AS(forward(p, Batch::from_sequences({{0, 99, 1}}, 2)), Error);
}

TEST_CASE("smoothed loss values") {
  Tensor logits({1, 2});
  const int y[] = {1};
  const auto zero = loss_ce_smooth(logits, y, 0.1, {1.0, 1.0});
  CHECK(zero.loss == doctest::Approx(std::log(2.0)));
  logits.data = {-3.0f, 3.0f};
  const auto r = loss_ce_smooth(logits, y, 0.1, {1.0, 2.0});
  const double p1 = 1.0 / (1.0 + std::exp(-6.0));
  const double expected = -2.0 * (0.95 * std::log(p1) + 0.05 * std::log(1 - p1));
  CHECK(r.loss == doctest::Approx(expected).epsilon(1e-6));
  CHECK(r.dlogits.data[1] == doctest::Approx(2.0 * (p1 - 0.95)).epsilon(1e-5));
  const int bad[] = {2};
  CHECK_THROWS_AS(loss_ce_smooth(logits, bad, 0.1, {1.0, 1.0}), Error);
}
