#pragma once

#include <string>
#include <vector>

#include "vdet/config.hpp"
#include "vdet/corpus.hpp"
#include "vdet/explain.hpp"
#include "vdet/metrics.hpp"
#include "vdet/split.hpp"
#include "vdet/tokenizer.hpp"
#include "vdet/train.hpp"
#include "vdet/verify.hpp"

namespace vdet {

/// File names inside the output directory.
namespace artifact {
inline constexpr const char* synthetic = "synthetic.jsonl";
inline constexpr const char* corpus = "corpus.jsonl";
inline constexpr const char* summary = "corpus_summary.json";
inline constexpr const char* split = "split.json";
inline constexpr const char* leakage = "leakage.json";
inline constexpr const char* tokenizer = "tokenizer.json";
inline constexpr const char* findings = "findings.jsonl";
inline constexpr const char* metrics = "metrics.json";
inline constexpr const char* confusion = "confusion_matrix.csv";
inline constexpr const char* explanations = "explanations.jsonl";
inline constexpr const char* verification = "verification.json";
inline constexpr const char* verified_findings = "findings_verified.jsonl";
inline constexpr const char* verified_metrics = "metrics_verified.json";
}  // namespace artifact

std::string artifact_path(const PipelineConfig& config, const std::string& name);
std::string checkpoint_name(InputView view);  // "model_plain.ckpt"

/// Writes the seeded synthetic corpus to `synthetic.jsonl` and returns it.
DatasetManifest stage_gen_synthetic(const PipelineConfig& config);

/// Ingests and dedups `paths`, writing corpus.jsonl and corpus_summary.json.
DatasetManifest stage_ingest(const PipelineConfig& config, const std::vector<std::string>& paths);

/// Writes split.json and leakage.json.
SplitAssignment stage_split(const PipelineConfig& config);

/// Learns merges over the train split and writes tokenizer.json.
BpeModel stage_bpe_train(const PipelineConfig& config);

/// Trains one member per configured view; writes checkpoints and loss logs.
std::vector<TrainResult> stage_train(const PipelineConfig& config);

struct EvalResult {
  std::vector<Finding> findings;  // test split, every sample
  double threshold = 0.5;
  ConfusionMatrix cm;
  MetricsReport report;
};

/// predict → fuse → threshold → metrics on the test split.
EvalResult stage_eval(const PipelineConfig& config);

/// Explains the positive findings of findings.jsonl into explanations.jsonl.
std::vector<Finding> stage_explain(const PipelineConfig& config);

struct VerifyStageResult {
  VerificationResult verification;
  ConfusionMatrix before, after;
};

/// Judges findings.jsonl; writes verification.json and the verified findings/metrics.
VerifyStageResult stage_verify(const PipelineConfig& config);

struct ScanResult {
  std::vector<Finding> retained;  // positives that survived verification
  VerificationReport report;
};

/// predict + explain + verify over ad-hoc source files; findings.jsonl holds retained positives.
ScanResult stage_scan(const PipelineConfig& config, const std::vector<std::string>& files);

/// Fused findings for arbitrary samples with loaded members.
std::vector<Finding> ensemble_findings(const PipelineConfig& config,
                                       const std::vector<ModelCheckpoint>& members,
                                       const BpeModel& bpe, const std::vector<CodeSample>& samples,
                                       double threshold);

std::vector<ModelCheckpoint> load_members(const PipelineConfig& config);

}  // namespace vdet
