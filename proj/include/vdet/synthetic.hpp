#pragma once

#include <cstdint>
#include <string>

#include "vdet/corpus.hpp"

namespace vdet {

struct SyntheticConfig {
  int n_samples = 600;
  int n_projects = 30;           // split evenly across C-family, Python, Solidity
  double vuln_fraction = 0.45;
  double decoy_rate = 0.0;       // share of safe samples that mimic a vulnerable pattern
  std::uint64_t seed = 0;

  void validate() const;
};

/// Seeded corpus with planted trigger patterns that the heuristic judge
/// recognizes. Decoys are labeled safe and normalize like vulnerable code.
/// Every sample records its pattern in `unit_name` ("vuln:strcpy", "safe:...", "decoy:...").
DatasetManifest generate_synthetic(const SyntheticConfig& config);

struct TriggerCorpus {
  DatasetManifest manifest;
  // Line of the trigger statement for each sample, by id.
  std::map<std::string, int> trigger_line;
};

/// Python functions whose label is decided by one call on one line
/// (`open(...)` vulnerable, `len(...)` safe); every other line is neutral.
TriggerCorpus generate_trigger_corpus(int n_samples, int n_projects, std::uint64_t seed);

}  // namespace vdet
