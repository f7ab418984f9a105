#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vdet/common.hpp"

namespace vdet {

/// One labeled source unit: a row of the canonical JSONL dataset.
struct CodeSample {
  std::string id;
  Language language = Language::c;
  std::string project;
  std::string file_path;
  std::string unit_name;
  std::string code;
  int label = 0;  // 0 safe, 1 vulnerable
  std::vector<std::string> cwes;
  std::string origin;
  std::string commit;

  bool operator==(const CodeSample&) const = default;
};

struct DatasetManifest {
  std::vector<CodeSample> samples;
  std::vector<std::string> source_files;
  // Filled in by dedup().
  std::size_t duplicates_removed = 0;
  std::size_t conflicts_removed = 0;  // samples dropped for conflicting labels
  std::size_t conflict_keys = 0;      // distinct keys with conflicting labels

  bool operator==(const DatasetManifest&) const = default;
};

struct OriginRow {
  std::string name;
  std::size_t total = 0;
  std::size_t safe = 0;
  std::size_t vulnerable = 0;

  bool operator==(const OriginRow&) const = default;
};

struct CorpusSummary {
  std::vector<OriginRow> origins;  // sorted by name
  std::map<std::string, std::size_t> languages;
  std::size_t total = 0;
  std::size_t duplicates_removed = 0;
  std::size_t conflicts_removed = 0;
  std::size_t conflict_keys = 0;
};

/// Parses one JSONL line into a sample; `where` prefixes error messages.
CodeSample parse_sample_line(std::string_view line, const std::string& where);
std::string sample_to_json_line(const CodeSample& sample);

/// Reads canonical JSONL files in order. Errors name the file and line.
DatasetManifest ingest(const std::vector<std::string>& paths);

/// Writes the manifest samples as canonical JSONL.
void write_jsonl(const std::string& path, const DatasetManifest& manifest);

/// Dedup key: hash of the language and the normalized code.
std::uint64_t dedup_key(const CodeSample& sample);

/// Drops repeated keys with the same label (keeping the first) and every
/// sample whose key carries conflicting labels.
DatasetManifest dedup(const DatasetManifest& manifest);

CorpusSummary summarize(const DatasetManifest& manifest);
std::string summary_to_json(const CorpusSummary& summary);

}  // namespace vdet
