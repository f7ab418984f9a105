#include "vdet/split.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "vdet/rng.hpp"

namespace vdet {

using nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw Error("unknown split '" + std::string(name) + "'");
}

void SplitConfig::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error("split ratios must be positive");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
}

Split SplitAssignment::of(const std::string& project) const {
  auto it = projects.find(project);
  if (it == projects.end()) throw Error("project '" + project + "' has no split assignment");
  return it->second;
}

SplitAssignment split_projects(const DatasetManifest& manifest, const SplitConfig& config) {
  config.validate();
  if (manifest.samples.empty()) throw Error("cannot split an empty manifest");

  std::map<std::string, std::size_t> sizes;
  for (const auto& s : manifest.samples) ++sizes[s.project];

  std::vector<std::pair<std::string, std::size_t>> order(sizes.begin(), sizes.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  // Only runs of equal size are shuffled, so the seed varies ties but never
  // the size ordering the greedy rule relies on.
  Rng rng(config.seed);
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin;
    while (end < order.size() && order[end].second == order[begin].second) ++end;
    std::vector<std::pair<std::string, std::size_t>> run(order.begin() + begin,
                                                         order.begin() + end);
    rng.shuffle(run);
    std::copy(run.begin(), run.end(), order.begin() + begin);
    begin = end;
  }

  SplitAssignment out;
  const double total = static_cast<double>(manifest.samples.size());
  for (const auto& [project, count] : order) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t s = 0; s < 3; ++s) {
      const double deficit = config.ratios[s] * total - static_cast<double>(out.sample_counts[s]);
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    out.projects[project] = static_cast<Split>(best);
    out.sample_counts[best] += count;
    ++out.project_counts[best];
  }
  if (sizes.size() < 3) {
    out.warnings.push_back("only " + std::to_string(sizes.size()) +
                           " project(s); split ratios are unachievable");
  }
  return out;
}

LeakageReport check_leakage(const DatasetManifest& manifest, const SplitAssignment& assignment,
                            const std::map<std::string, Split>& sample_splits) {
  auto split_of = [&](const CodeSample& s) {
    auto it = sample_splits.find(s.id);
    return it != sample_splits.end() ? it->second : assignment.of(s.project);
  };

  LeakageReport report;
  std::map<std::string, std::set<Split>> project_splits;
  std::map<std::uint64_t, std::vector<std::pair<std::string, Split>>> by_key;
  std::vector<std::uint64_t> key_order;
  for (const auto& s : manifest.samples) {
    const Split split = split_of(s);
    project_splits[s.project].insert(split);
    const auto key = dedup_key(s);
    auto& entry = by_key[key];
    if (entry.empty()) key_order.push_back(key);
    entry.emplace_back(s.id, split);
  }
  for (const auto& [project, splits] : project_splits) {
    if (splits.size() > 1) report.projects_in_multiple_splits.push_back(project);
  }
  for (auto key : key_order) {
    const auto& entries = by_key[key];
    std::set<Split> splits;
    for (const auto& e : entries) splits.insert(e.second);
    if (splits.size() > 1) {
      CrossSplitClone clone{key, {}};
      for (const auto& e : entries) clone.sample_ids.push_back(e.first);
      report.cross_split_clones.push_back(std::move(clone));
    }
  }
  return report;
}

std::vector<CodeSample> select_split(const DatasetManifest& manifest,
                                     const SplitAssignment& assignment, Split split) {
  std::vector<CodeSample> out;
  for (const auto& s : manifest.samples) {
    if (assignment.of(s.project) == split) out.push_back(s);
  }
  return out;
}

std::string assignment_to_json(const SplitAssignment& a) {
  json projects = json::object();
  for (const auto& [project, split] : a.projects) projects[project] = std::string(to_string(split));
  json summary = json::object();
  for (std::size_t s = 0; s < 3; ++s) {
    summary[std::string(to_string(static_cast<Split>(s)))] = {
        {"samples", a.sample_counts[s]}, {"projects", a.project_counts[s]}};
  }
  summary["warnings"] = a.warnings;
  json obj = {{"projects", projects}, {"summary", summary}};
  return obj.dump(2) + "\n";
}

SplitAssignment assignment_from_json(std::string_view text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed split file: ") + e.what());
  }
  SplitAssignment a;
  for (const auto& [project, split] : obj.at("projects").items()) {
    a.projects[project] = parse_split(split.get<std::string>());
  }
  const auto& summary = obj.at("summary");
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& row = summary.at(std::string(to_string(static_cast<Split>(s))));
    a.sample_counts[s] = row.at("samples").get<std::size_t>();
    a.project_counts[s] = row.at("projects").get<std::size_t>();
  }
  a.warnings = summary.at("warnings").get<std::vector<std::string>>();
  return a;
}

std::string leakage_to_json(const LeakageReport& report) {
  json clones = json::array();
  for (const auto& c : report.cross_split_clones) {
    clones.push_back({{"key", hex64(c.key)}, {"sample_ids", c.sample_ids}});
  }
  json obj = {{"projects_in_multiple_splits", report.projects_in_multiple_splits},
              {"cross_split_clones", clones},
              {"clean", report.clean()}};
  return obj.dump(2) + "\n";
}

}  // namespace vdet
