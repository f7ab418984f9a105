#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdet/rng.hpp"
#include "vdet/tensor.hpp"

namespace vdet {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ffn = 256;
  int max_len = 128;
  double dropout = 0.1;
  int n_classes = 2;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

template <typename S>
struct EncoderLayerParams {
  BasicTensor<S> query_w, query_b, key_w, key_b, value_w, value_b, output_w, output_b;
  BasicTensor<S> norm1_gain, norm1_bias;
  BasicTensor<S> ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
  BasicTensor<S> norm2_gain, norm2_bias;
};

/// All trainable tensors. Weights are stored [in, out]: y = x W + b.
template <typename S>
struct BasicParameters {
  ModelConfig config;
  BasicTensor<S> token_embedding;     // [vocab, d_model]
  BasicTensor<S> position_embedding;  // [max_len, d_model]
  std::vector<EncoderLayerParams<S>> layers;
  BasicTensor<S> pooler_w, pooler_b;
  BasicTensor<S> classifier_w, classifier_b;
  // Bumped on every in-place update so stale traces can be detected.
  std::uint64_t version = 0;

  /// Allocates correctly shaped tensors filled with zeros.
  static BasicParameters zeros(const ModelConfig& config);

  /// Calls fn(name, tensor) for every tensor, in a fixed order.
  void visit(const std::function<void(const std::string&, BasicTensor<S>&)>& fn);
  void visit(const std::function<void(const std::string&, const BasicTensor<S>&)>& fn) const;

  std::size_t parameter_count() const;
};

using Parameters = BasicParameters<float>;

/// Converts every tensor to another scalar type (used by gradient checks).
template <typename To, typename From>
BasicParameters<To> cast_parameters(const BasicParameters<From>& params);

/// Embeddings and dense weights ~ N(0, stddev^2); biases 0; norm gains 1.
Parameters init_parameters(const ModelConfig& config, std::uint64_t seed, double stddev = 0.02);

/// Padded id matrix with a validity mask (1 = real token).
struct Batch {
  std::size_t size = 0;
  std::size_t seq_len = 0;
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;

  /// Pads every sequence to the longest one with [PAD].
  static Batch from_sequences(const std::vector<std::vector<int>>& sequences, int pad_id);
};

template <typename S>
struct LayerCache {
  std::vector<S> input, q, k, v, probs, ctx, attn_drop, y1, xhat1, rstd1, f1, g, ffn_drop, xhat2,
      rstd2;
};

template <typename S>
struct SampleCache {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;
  std::vector<S> embed_drop;
  std::vector<LayerCache<S>> layers;
  std::vector<S> cls, pooled, pool_drop, pooled_out;
};

/// Activations cached by forward() for backward() and for attention rollout.
template <typename S>
struct BasicForwardTrace {
  const void* params = nullptr;
  std::uint64_t params_version = 0;
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  int n_heads = 0;
  std::vector<SampleCache<S>> samples;

  /// Attention probabilities of one layer for one sample, [n_heads, T, T].
  const std::vector<S>& attention(std::size_t sample, std::size_t layer) const {
    return samples.at(sample).layers.at(layer).probs;
  }
};

using ForwardTrace = BasicForwardTrace<float>;

template <typename S>
struct ForwardResult {
  BasicTensor<S> logits;  // [B, n_classes]
  BasicForwardTrace<S> trace;
};

struct ForwardOptions {
  bool training = false;  // enables dropout
  Rng* rng = nullptr;     // required when training with dropout > 0
};

inline constexpr double kMaskedScore = -1e9;

template <typename S>
ForwardResult<S> forward(const BasicParameters<S>& params, const Batch& batch,
                         const ForwardOptions& options = {});

template <typename S>
struct LossResult {
  double loss = 0.0;
  BasicTensor<S> dlogits;
};

/// Class-weighted, label-smoothed cross-entropy averaged over the batch.
template <typename S>
LossResult<S> loss_ce_smooth(const BasicTensor<S>& logits, std::span<const int> labels,
                             double epsilon, std::array<double, 2> class_weights);

/// Exact gradients of the loss with respect to every parameter.
template <typename S>
BasicParameters<S> backward(const BasicParameters<S>& params, const BasicForwardTrace<S>& trace,
                            const BasicTensor<S>& dlogits);

/// Numerically stable two-class softmax probability of class 1.
double positive_probability(double logit0, double logit1);

}  // namespace vdet
