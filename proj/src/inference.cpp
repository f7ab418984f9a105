#include "vdet/inference.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <thread>

#include "vdet/metrics.hpp"

namespace vdet {

using nlohmann::json;

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::confirmed: return "confirmed";
    case Decision::overturned: return "overturned";
    case Decision::uncertain: return "uncertain";
  }
  return "uncertain";
}

std::string_view to_string(JudgeKind kind) {
  return kind == JudgeKind::heuristic ? "heuristic" : "remote";
}

std::string_view to_string(Fusion fusion) {
  return fusion == Fusion::uniform_mean ? "uniform_mean" : "f1_weighted";
}

Fusion parse_fusion(std::string_view name) {
  if (name == "uniform_mean") return Fusion::uniform_mean;
  if (name == "f1_weighted") return Fusion::f1_weighted;
  throw Error("unknown fusion '" + std::string(name) + "'");
}

namespace {

json lines_to_json(const std::vector<LineWeight>& lines) {
  json out = json::array();
  for (const auto& lw : lines) out.push_back({{"line", lw.line}, {"weight", lw.weight}});
  return out;
}

std::vector<LineWeight> lines_from_json(const json& j) {
  std::vector<LineWeight> out;
  for (const auto& e : j) out.push_back({e.at("line").get<int>(), e.at("weight").get<double>()});
  return out;
}

Decision parse_decision(std::string_view name) {
  if (name == "confirmed") return Decision::confirmed;
  if (name == "overturned") return Decision::overturned;
  if (name == "uncertain") return Decision::uncertain;
  throw Error("unknown verdict '" + std::string(name) + "'");
}

}  // namespace

json finding_to_json(const Finding& f) {
  json j = {{"id", f.id}, {"p_vuln", f.p_vuln}, {"label", f.label}, {"threshold", f.threshold}};
  if (f.members.size() > 1) j["members"] = f.members;
  if (f.explanation) {
    j["explanation"] = {{"top_lines", lines_to_json(f.explanation->top_k)},
                        {"line_scores", lines_to_json(f.explanation->line_scores)},
                        {"token_scores_len", f.explanation->token_scores.size()}};
  }
  if (f.verdict) {
    j["verdict"] = {{"decision", std::string(to_string(f.verdict->decision))},
                    {"rationale", f.verdict->rationale},
                    {"confidence", f.verdict->confidence},
                    {"judge", std::string(to_string(f.verdict->judge))}};
  }
  return j;
}

std::string findings_to_jsonl(const std::vector<Finding>& findings) {
  std::string out;
  for (const auto& f : findings) out += finding_to_json(f).dump() + "\n";
  return out;
}

Finding finding_from_json(const json& j) {
  Finding f;
  f.id = j.at("id").get<std::string>();
  f.p_vuln = j.at("p_vuln").get<double>();
  f.label = j.at("label").get<int>();
  f.threshold = j.at("threshold").get<double>();
  if (j.contains("members")) f.members = j.at("members").get<std::vector<double>>();
  if (j.contains("explanation")) {
    const auto& e = j.at("explanation");
    Explanation ex;
    ex.top_k = lines_from_json(e.at("top_lines"));
    if (e.contains("line_scores")) ex.line_scores = lines_from_json(e.at("line_scores"));
    f.explanation = std::move(ex);
  }
  if (j.contains("verdict")) {
    const auto& v = j.at("verdict");
    Verdict verdict;
    verdict.decision = parse_decision(v.at("decision").get<std::string>());
    verdict.rationale = v.at("rationale").get<std::string>();
    verdict.confidence = v.at("confidence").get<double>();
    verdict.judge = v.at("judge").get<std::string>() == "remote" ? JudgeKind::remote
                                                                   : JudgeKind::heuristic;
    f.verdict = std::move(verdict);
  }
  return f;
}

std::vector<Finding> read_findings(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<Finding> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(finding_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": bad finding: " + e.what());
    }
  }
  return out;
}

void check_tokenizer(const ModelCheckpoint& checkpoint, const BpeModel& bpe) {
  const auto hash = bpe.content_hash();
  if (checkpoint.tokenizer_hash != hash)
    throw Error("tokenizer mismatch: checkpoint expects " + checkpoint.tokenizer_hash +
                ", tokenizer is " + hash);
}

double predict(const ModelCheckpoint& checkpoint, const BpeModel& bpe, const CodeSample& sample) {
  return predict_many(checkpoint, bpe, {sample}, 1).at(0);
}

std::vector<double> predict_many(const ModelCheckpoint& checkpoint, const BpeModel& bpe,
                                 const std::vector<CodeSample>& samples, int threads) {
  check_tokenizer(checkpoint, bpe);
  const auto view = checkpoint.train.view;
  const int max_len = checkpoint.params.config.max_len;
  std::vector<std::vector<int>> seqs(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    seqs[i] = encode_sample(samples[i], bpe, view, max_len).ids;

  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads < 1 ? 1 : threads, samples.size()));
  if (workers <= 1) return predict_sequences(checkpoint.params, seqs);

  // Each worker owns a contiguous slice; results are independent of the split.
  std::vector<double> out(samples.size());
  std::vector<std::thread> pool;
  const std::size_t per = (samples.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * per, end = std::min(samples.size(), begin + per);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      std::vector<std::vector<int>> part(seqs.begin() + begin, seqs.begin() + end);
      auto ps = predict_sequences(checkpoint.params, part);
      std::copy(ps.begin(), ps.end(), out.begin() + begin);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

double fuse(const std::vector<double>& member_ps, const EnsembleSpec& spec) {
  if (member_ps.empty()) throw Error("fuse needs at least one member probability");
  if (!spec.members.empty() && member_ps.size() != spec.members.size())
    throw Error("fuse got " + std::to_string(member_ps.size()) + " probabilities for " +
                std::to_string(spec.members.size()) + " members");
  if (member_ps.size() == 1) return member_ps[0];
  if (spec.fusion == Fusion::uniform_mean) {
    double sum = 0.0;
    for (double p : member_ps) sum += p;
    return sum / static_cast<double>(member_ps.size());
  }
  if (spec.member_f1.size() != member_ps.size())
    throw Error("f1_weighted fusion needs one validation F1 per member");
  double wsum = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < member_ps.size(); ++i) {
    if (!(spec.member_f1[i] > 0.0)) throw Error("f1_weighted fusion needs positive F1 values");
    wsum += spec.member_f1[i];
    acc += spec.member_f1[i] * member_ps[i];
  }
  const double fused = acc / wsum;
  // Guard against rounding pushing the mean outside the member range.
  const auto [lo, hi] = std::minmax_element(member_ps.begin(), member_ps.end());
  return std::clamp(fused, *lo, *hi);
}

double tune_threshold(const std::vector<std::pair<double, int>>& val_findings) {
  bool has_pos = false, has_neg = false;
  std::set<double> candidates{0.5};
  for (const auto& [p, y] : val_findings) {
    (y == 1 ? has_pos : has_neg) = true;
    candidates.insert(p);
  }
  if (!has_pos || !has_neg) throw Error("threshold tuning needs both labels in validation");

  double best_tau = 0.5, best_f1 = -1.0;
  for (double tau : candidates) {  // ascending, so strict > keeps the smallest on ties
    ConfusionMatrix cm;
    for (const auto& [p, y] : val_findings) cm.add(p >= tau ? 1 : 0, y);
    const double f1 = metrics(cm).f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_tau = tau;
    }
  }
  return best_tau;
}

Finding make_finding(std::string id, double p_vuln, double threshold, std::vector<double> members) {
  Finding f;
  f.id = std::move(id);
  f.p_vuln = p_vuln;
  f.threshold = threshold;
  f.label = p_vuln >= threshold ? 1 : 0;
  f.members = std::move(members);
  return f;
}

}  // namespace vdet
