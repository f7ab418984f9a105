#include "vdet/explain.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

namespace vdet {

namespace {

std::vector<double> mixed_layer(const std::vector<double>& probs, int heads, std::size_t T,
                                const std::vector<std::uint8_t>& mask) {
  std::vector<double> a(T * T, 0.0);
  for (int h = 0; h < heads; ++h) {
    const double* src = probs.data() + static_cast<std::size_t>(h) * T * T;
    for (std::size_t i = 0; i < T * T; ++i) a[i] += src[i];
  }
  for (std::size_t i = 0; i < T; ++i) {
    double* row = a.data() + i * T;
    if (!mask[i]) {
      std::fill(row, row + T, 0.0);
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < T; ++j) {
      row[j] = mask[j] ? 0.5 * (row[j] / heads + (i == j ? 1.0 : 0.0)) : 0.0;
      sum += row[j];
    }
    for (std::size_t j = 0; j < T; ++j) row[j] /= sum;
  }
  return a;
}

}  // namespace

std::vector<double> rollout_matrix(const AttentionStack& attn) {
  const std::size_t T = attn.seq_len;
  if (attn.n_heads < 1 || T == 0) throw Error("rollout needs at least one head and one token");
  if (attn.mask.size() != T) throw Error("rollout mask length differs from sequence length");
  std::vector<double> r(T * T, 0.0);
  for (std::size_t i = 0; i < T; ++i)
    if (attn.mask[i]) r[i * T + i] = 1.0;
  std::vector<double> next(T * T);
  for (const auto& probs : attn.layers) {
    if (probs.size() != static_cast<std::size_t>(attn.n_heads) * T * T)
      throw Error("attention layer has the wrong size");
    const auto a = mixed_layer(probs, attn.n_heads, T, attn.mask);
    // R <- Ā · R
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t k = 0; k < T; ++k) {
        const double aik = a[i * T + k];
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < T; ++j) next[i * T + j] += aik * r[k * T + j];
      }
    r.swap(next);
  }
  return r;
}

std::vector<double> attention_rollout(const AttentionStack& attn,
                                      const std::vector<bool>& content) {
  if (content.size() != attn.seq_len) throw Error("content mask length differs from sequence length");
  std::size_t n_content = 0;
  for (std::size_t j = 0; j < content.size(); ++j)
    if (content[j] && attn.mask[j]) ++n_content;
  if (n_content == 0) throw Error("cannot explain a sequence without content tokens");

  const auto r = rollout_matrix(attn);
  std::vector<double> scores;
  double total = 0.0;
  for (std::size_t j = 0; j < content.size(); ++j) {
    if (!(content[j] && attn.mask[j])) continue;
    scores.push_back(r[j]);  // row 0 is [CLS]
    total += r[j];
  }
  if (!(total > 1e-12)) {
    std::fill(scores.begin(), scores.end(), 1.0 / static_cast<double>(scores.size()));
    return scores;
  }
  for (auto& s : scores) s /= total;
  return scores;
}

Explanation line_attribution(const std::vector<double>& scores,
                             const std::vector<int>& token_to_line, std::size_t top_k) {
  if (scores.size() != token_to_line.size())
    throw Error("token scores and line map differ in length");
  std::map<int, double> by_line;
  for (std::size_t i = 0; i < scores.size(); ++i) by_line[token_to_line[i]] += scores[i];
  Explanation ex;
  ex.token_scores = scores;
  for (const auto& [line, w] : by_line) ex.line_scores.push_back({line, w});
  std::stable_sort(ex.line_scores.begin(), ex.line_scores.end(),
                   [](const LineWeight& a, const LineWeight& b) { return a.weight > b.weight; });
  ex.top_k.assign(ex.line_scores.begin(),
                  ex.line_scores.begin() + static_cast<std::ptrdiff_t>(std::min(top_k, ex.line_scores.size())));
  return ex;
}

Explanation explain_sample(const ModelCheckpoint& checkpoint, const BpeModel& bpe,
                           const CodeSample& sample, std::size_t top_k) {
  check_tokenizer(checkpoint, bpe);
  const auto enc = encode_sample(sample, bpe, checkpoint.train.view, checkpoint.params.config.max_len);
  const auto result = forward(checkpoint.params, Batch::from_sequences({enc.ids}, special::pad));
  const auto& trace = result.trace;

  AttentionStack attn;
  attn.n_heads = trace.n_heads;
  attn.seq_len = trace.seq_len;
  attn.mask.assign(trace.seq_len, 1);
  for (std::size_t l = 0; l < static_cast<std::size_t>(checkpoint.params.config.n_layers); ++l) {
    const auto& p = trace.attention(0, l);
    attn.layers.emplace_back(p.begin(), p.end());
  }
  std::vector<bool> content(enc.ids.size());
  std::vector<int> lines;
  for (std::size_t i = 0; i < enc.ids.size(); ++i) {
    content[i] = enc.token_to_line[i] > 0;
    if (content[i]) lines.push_back(enc.token_to_line[i]);
  }
  return line_attribution(attention_rollout(attn, content), lines, top_k);
}

std::string explanation_to_json_line(const std::string& id, const Explanation& ex) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& lw : ex.top_k) top.push_back({{"line", lw.line}, {"weight", lw.weight}});
  nlohmann::json j = {{"id", id}, {"top_lines", top}, {"token_scores_len", ex.token_scores.size()}};
  return j.dump() + "\n";
}

}  // namespace vdet
