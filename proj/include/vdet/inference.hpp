#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vdet/corpus.hpp"
#include "vdet/train.hpp"

namespace vdet {

struct LineWeight {
  int line = 0;
  double weight = 0.0;
  bool operator==(const LineWeight&) const = default;
};

struct Explanation {
  std::vector<double> token_scores;  // per content token, sums to 1
  std::vector<LineWeight> line_scores;  // descending weight, ties by smaller line
  std::vector<LineWeight> top_k;
};

enum class Decision { confirmed, overturned, uncertain };
enum class JudgeKind { heuristic, remote };

std::string_view to_string(Decision decision);
std::string_view to_string(JudgeKind kind);

struct Verdict {
  Decision decision = Decision::uncertain;
  std::string rationale;
  double confidence = 0.0;
  JudgeKind judge = JudgeKind::heuristic;
};

struct Finding {
  std::string id;
  double p_vuln = 0.0;
  int label = 0;  // 1 iff p_vuln >= threshold (until verification overturns it)
  double threshold = 0.5;
  std::vector<double> members;  // member probabilities; written only for ensembles
  std::optional<Explanation> explanation;
  std::optional<Verdict> verdict;
};

nlohmann::json finding_to_json(const Finding& finding);
std::string findings_to_jsonl(const std::vector<Finding>& findings);
Finding finding_from_json(const nlohmann::json& j);
std::vector<Finding> read_findings(const std::string& path);

enum class Fusion { uniform_mean, f1_weighted };
std::string_view to_string(Fusion fusion);
Fusion parse_fusion(std::string_view name);

struct EnsembleSpec {
  std::vector<std::string> members;  // checkpoint paths
  Fusion fusion = Fusion::uniform_mean;
  std::vector<double> member_f1;  // required for f1_weighted
};

/// p(vulnerable) for one sample; the checkpoint must match the tokenizer.
double predict(const ModelCheckpoint& checkpoint, const BpeModel& bpe, const CodeSample& sample);

/// Batched predict over many samples; `threads` workers split the batches.
std::vector<double> predict_many(const ModelCheckpoint& checkpoint, const BpeModel& bpe,
                                 const std::vector<CodeSample>& samples, int threads = 1);

/// Throws Error when the checkpoint was trained with a different tokenizer.
void check_tokenizer(const ModelCheckpoint& checkpoint, const BpeModel& bpe);

double fuse(const std::vector<double>& member_ps, const EnsembleSpec& spec);

/// F1-maximizing threshold over the observed probabilities plus 0.5;
/// ties go to the smallest threshold.
double tune_threshold(const std::vector<std::pair<double, int>>& val_findings);

Finding make_finding(std::string id, double p_vuln, double threshold,
                     std::vector<double> members = {});

}  // namespace vdet
