#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdet/inference.hpp"

namespace vdet {

/// Per-layer attention probabilities, each [n_heads, T, T] row-major.
struct AttentionStack {
  std::vector<std::vector<double>> layers;
  int n_heads = 0;
  std::size_t seq_len = 0;
  std::vector<std::uint8_t> mask;  // 1 = real token
};

/// R = Ā_L ... Ā_1 with Ā = rownorm(0.5 (mean_heads(A) + I)) over unmasked
/// columns. Returned as [T, T]; masked rows and columns are zero.
std::vector<double> rollout_matrix(const AttentionStack& attn);

/// CLS row of the rollout restricted to `content` positions and renormalized.
/// Falls back to uniform scores when the CLS row carries no content mass.
/// Throws Error when no content position exists.
std::vector<double> attention_rollout(const AttentionStack& attn,
                                      const std::vector<bool>& content);

/// Sums token scores per line; lines ranked by descending weight, ties by line.
Explanation line_attribution(const std::vector<double>& scores,
                             const std::vector<int>& token_to_line, std::size_t top_k = 3);

/// Encodes the sample, runs the model once and explains its prediction.
Explanation explain_sample(const ModelCheckpoint& checkpoint, const BpeModel& bpe,
                           const CodeSample& sample, std::size_t top_k = 3);

/// One `explanations.jsonl` row: {id, top_lines, token_scores_len}.
std::string explanation_to_json_line(const std::string& id, const Explanation& explanation);

}  // namespace vdet
