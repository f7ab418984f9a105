#pragma once

#include <map>
#include <string>
#include <vector>

#include "vdet/corpus.hpp"
#include "vdet/inference.hpp"

namespace vdet {

struct JudgeConfig {
  JudgeKind mode = JudgeKind::heuristic;
  std::string endpoint;  // remote only; VDET_JUDGE_URL when empty
  std::string token;     // bearer token; VDET_JUDGE_TOKEN when empty
  double timeout_seconds = 30.0;
  int retries = 2;
  double overturn_probability_ceiling = 0.9;

  void validate() const;
};

/// Everything a judge sees about one flagged finding.
struct JudgeRequest {
  const Finding* finding = nullptr;
  std::string code;  // raw, un-normalized
  Language language = Language::c;
  std::vector<std::string> cwe_hints;
};

/// Name of the first rule that fires on raw code, or empty when none does.
std::string heuristic_rule(std::string_view code, Language language);

Verdict judge_heuristic(const Finding& finding, std::string_view raw_code, Language language,
                        double ceiling = 0.9);

/// Never throws: transport, protocol and timeout failures become UNCERTAIN.
Verdict judge_remote(const JudgeRequest& request, const JudgeConfig& config);

struct VerificationReport {
  std::size_t judged = 0, confirmed = 0, overturned = 0, uncertain = 0;
  double verification_rate = 0.0;
  bool rate_undefined = true;
  std::size_t positives_before = 0, positives_after = 0;
};

struct VerificationResult {
  std::vector<Finding> findings;  // same order as input; overturned labels flipped to 0
  VerificationReport report;
};

/// Judges every positive finding against its raw sample. Negatives pass through.
/// Remote judging keeps at most 4 requests in flight.
VerificationResult apply_verification(const std::vector<Finding>& findings,
                                      const std::map<std::string, const CodeSample*>& samples,
                                      const JudgeConfig& config);

std::string verification_to_json(const VerificationResult& result);

}  // namespace vdet
