// Central finite-difference check of backward() on a tiny double model.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vdet/model.hpp"

namespace vdet::testing {

inline constexpr double kGradNormFloor = 1e-6;

struct TensorGradError {
  std::string name;
  double relative = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||, floor)
  double max_abs = 0.0;
};

struct GradCheckSetup {
  BasicParameters<double> params;
  Batch batch;
  std::vector<int> labels;
  double smoothing = 0.1;
  std::array<double, 2> weights{0.8, 1.4};
};

inline GradCheckSetup tiny_setup(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.vocab_size = 16;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_layers = 1;
  cfg.d_ffn = 16;
  cfg.max_len = 6;
  cfg.dropout = 0.0;
  GradCheckSetup s;
  // A larger init than training uses keeps gradients well away from zero.
  s.params = cast_parameters<double>(init_parameters(cfg, seed, 0.5));
  Rng rng(seed + 1);
  for (auto* t : {&s.params.layers[0].norm1_gain, &s.params.layers[0].norm2_gain})
    for (auto& v : t->data) v = 1.0 + 0.3 * rng.normal();
  for (auto* t : {&s.params.layers[0].norm1_bias, &s.params.layers[0].norm2_bias,
                  &s.params.layers[0].query_b, &s.params.layers[0].ffn_in_b, &s.params.pooler_b})
    for (auto& v : t->data) v = 0.2 * rng.normal();
  // One full-length and one padded sequence (T = 6) exercise the attention mask.
  s.batch = Batch::from_sequences({{0, 6, 9, 12, 15, 1}, {0, 7, 11, 1}}, 2);
  s.labels = {1, 0};
  return s;
}

inline double loss_of(const BasicParameters<double>& p, const GradCheckSetup& s) {
  const auto f = forward(p, s.batch);
  return loss_ce_smooth(f.logits, s.labels, s.smoothing, s.weights).loss;
}

inline std::vector<TensorGradError> gradient_check(std::uint64_t seed, double h = 1e-3) {
  auto s = tiny_setup(seed);
  const auto f = forward(s.params, s.batch);
  const auto loss = loss_ce_smooth(f.logits, s.labels, s.smoothing, s.weights);
  const auto grads = backward(s.params, f.trace, loss.dlogits);

  std::vector<const BasicTensor<double>*> analytic;
  grads.visit([&](const std::string&, const BasicTensor<double>& t) { analytic.push_back(&t); });

  std::vector<TensorGradError> out;
  std::size_t k = 0;
  auto probe = s.params;
  probe.visit([&](const std::string& name, BasicTensor<double>& t) {
    const auto& a = *analytic[k++];
    double diff2 = 0, a2 = 0, n2 = 0, max_abs = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t.data[i];
      t.data[i] = orig + h;
      const double up = loss_of(probe, s);
      t.data[i] = orig - h;
      const double down = loss_of(probe, s);
      t.data[i] = orig;
      const double numeric = (up - down) / (2 * h);
      diff2 += (a.data[i] - numeric) * (a.data[i] - numeric);
      a2 += a.data[i] * a.data[i];
      n2 += numeric * numeric;
      max_abs = std::max(max_abs, std::abs(a.data[i] - numeric));
    }
    // Key biases shift every score in a softmax row equally, so their true
    // gradient is zero and both estimates are rounding noise; the floor keeps
    // noise-over-noise from reading as a large relative error.
    const double denom = std::max(std::sqrt(std::max(a2, n2)), kGradNormFloor);
    out.push_back({name, std::sqrt(diff2) / denom, max_abs});
  });
  return out;
}

}  // namespace vdet::testing
