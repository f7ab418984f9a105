#include "vdet/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "vdet/normalize.hpp"

namespace vdet {

using nlohmann::json;

namespace {

constexpr const char* kKeys[] = {"id",   "language", "project", "file_path", "unit_name",
                                 "code", "label",    "cwes",    "origin",    "commit"};

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw Error(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

CodeSample parse_sample_line(std::string_view line, const std::string& where) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(where + ": malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object()) throw Error(where + ": expected a JSON object");
  for (const char* key : kKeys) {
    if (!obj.contains(key)) throw Error(where + ": missing field '" + key + "'");
  }
  if (obj.size() != std::size(kKeys)) {
    for (const auto& [key, _] : obj.items()) {
      if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
        throw Error(where + ": unknown field '" + key + "'");
    }
  }

  CodeSample s;
  s.id = get_string(obj, "id", where);
  try {
    s.language = parse_language(get_string(obj, "language", where));
  } catch (const Error& e) {
    throw Error(where + ": " + e.what());
  }
  s.project = get_string(obj, "project", where);
  s.file_path = get_string(obj, "file_path", where);
  s.unit_name = get_string(obj, "unit_name", where);
  s.code = get_string(obj, "code", where);
  s.origin = get_string(obj, "origin", where);
  s.commit = get_string(obj, "commit", where);

  const auto& label = obj.at("label");
  if (!label.is_number_integer() || (label.get<long long>() != 0 && label.get<long long>() != 1))
    throw Error(where + ": label must be 0 or 1, got " + label.dump());
  s.label = label.get<int>();

  const auto& cwes = obj.at("cwes");
  if (!cwes.is_array()) throw Error(where + ": field 'cwes' must be an array");
  for (const auto& c : cwes) {
    if (!c.is_string()) throw Error(where + ": 'cwes' entries must be strings");
    s.cwes.push_back(c.get<std::string>());
  }

  if (s.id.empty()) throw Error(where + ": empty id");
  if (s.code.empty()) throw Error(where + ": empty code");
  return s;
}

std::string sample_to_json_line(const CodeSample& s) {
  json obj = {{"id", s.id},
              {"language", std::string(to_string(s.language))},
              {"project", s.project},
              {"file_path", s.file_path},
              {"unit_name", s.unit_name},
              {"code", s.code},
              {"label", s.label},
              {"cwes", s.cwes},
              {"origin", s.origin},
              {"commit", s.commit}};
  return obj.dump();
}

DatasetManifest ingest(const std::vector<std::string>& paths) {
  DatasetManifest manifest;
  std::set<std::string> seen_ids;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dataset file '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      const std::string where = path + ":" + std::to_string(line_no);
      CodeSample s = parse_sample_line(line, where);
      if (!seen_ids.insert(s.id).second) throw Error(where + ": duplicate id '" + s.id + "'");
      manifest.samples.push_back(std::move(s));
    }
    manifest.source_files.push_back(path);
  }
  return manifest;
}

void write_jsonl(const std::string& path, const DatasetManifest& manifest) {
  std::string out;
  for (const auto& s : manifest.samples) {
    out += sample_to_json_line(s);
    out += '\n';
  }
  write_file(path, out);
}

std::uint64_t dedup_key(const CodeSample& sample) {
  std::string material(to_string(sample.language));
  material += '\x1f';
  material += normalize(sample.code, sample.language).text;
  return fnv1a64(material);
}

DatasetManifest dedup(const DatasetManifest& manifest) {
  struct KeyInfo {
    int first_label = -1;
    bool conflict = false;
  };
  std::vector<std::uint64_t> keys;
  keys.reserve(manifest.samples.size());
  std::unordered_map<std::uint64_t, KeyInfo> info;
  for (const auto& s : manifest.samples) {
    const auto key = dedup_key(s);
    keys.push_back(key);
    auto& k = info[key];
    if (k.first_label < 0) k.first_label = s.label;
    else if (k.first_label != s.label) k.conflict = true;
  }

  DatasetManifest out;
  out.source_files = manifest.source_files;
  out.duplicates_removed = manifest.duplicates_removed;
  out.conflicts_removed = manifest.conflicts_removed;
  out.conflict_keys = manifest.conflict_keys;
  std::set<std::uint64_t> kept, conflicted;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const auto key = keys[i];
    if (info[key].conflict) {
      ++out.conflicts_removed;
      conflicted.insert(key);
      continue;
    }
    if (!kept.insert(key).second) {
      ++out.duplicates_removed;
      continue;
    }
    out.samples.push_back(manifest.samples[i]);
  }
  out.conflict_keys += conflicted.size();
  return out;
}

CorpusSummary summarize(const DatasetManifest& manifest) {
  CorpusSummary summary;
  std::map<std::string, OriginRow> rows;
  for (const auto& s : manifest.samples) {
    auto& row = rows[s.origin];
    row.name = s.origin;
    ++row.total;
    (s.label == 1 ? row.vulnerable : row.safe) += 1;
    ++summary.languages[std::string(to_string(s.language))];
  }
  for (auto& [_, row] : rows) summary.origins.push_back(row);
  summary.total = manifest.samples.size();
  summary.duplicates_removed = manifest.duplicates_removed;
  summary.conflicts_removed = manifest.conflicts_removed;
  summary.conflict_keys = manifest.conflict_keys;
  return summary;
}

std::string summary_to_json(const CorpusSummary& summary) {
  json rows = json::array();
  for (const auto& r : summary.origins) {
    rows.push_back({{"name", r.name},
                    {"total", r.total},
                    {"safe", r.safe},
                    {"vulnerable", r.vulnerable}});
  }
  json obj = {{"origins", rows},
              {"languages", summary.languages},
              {"total", summary.total},
              {"duplicates_removed", summary.duplicates_removed},
              {"conflicts_removed", summary.conflicts_removed},
              {"conflict_keys", summary.conflict_keys}};
  return obj.dump(2) + "\n";
}

}  // namespace vdet
