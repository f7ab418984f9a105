#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vdet/corpus.hpp"

namespace vdet {

enum class Split { train = 0, val = 1, test = 2 };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct SplitConfig {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;

  void validate() const;  // throws Error unless ratios are positive and sum to 1
};

struct SplitAssignment {
  std::map<std::string, Split> projects;
  std::array<std::size_t, 3> sample_counts{0, 0, 0};
  std::array<std::size_t, 3> project_counts{0, 0, 0};
  std::vector<std::string> warnings;

  Split of(const std::string& project) const;
  bool operator==(const SplitAssignment&) const = default;
};

struct CrossSplitClone {
  std::uint64_t key;
  std::vector<std::string> sample_ids;  // in manifest order
};

struct LeakageReport {
  std::vector<std::string> projects_in_multiple_splits;
  std::vector<CrossSplitClone> cross_split_clones;

  bool clean() const { return projects_in_multiple_splits.empty() && cross_split_clones.empty(); }
};

/// Greedy largest-deficit assignment of whole projects.
SplitAssignment split_projects(const DatasetManifest& manifest, const SplitConfig& config);

/// `sample_splits` optionally overrides project-level assignment per sample id;
/// it exists so a corrupted sample-level split can be audited too.
LeakageReport check_leakage(const DatasetManifest& manifest, const SplitAssignment& assignment,
                            const std::map<std::string, Split>& sample_splits = {});

/// Samples of the manifest belonging to one split, in manifest order.
std::vector<CodeSample> select_split(const DatasetManifest& manifest,
                                     const SplitAssignment& assignment, Split split);

std::string assignment_to_json(const SplitAssignment& assignment);
SplitAssignment assignment_from_json(std::string_view text);
std::string leakage_to_json(const LeakageReport& report);

}  // namespace vdet
