#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdet/inference.hpp"
#include "vdet/model.hpp"
#include "vdet/split.hpp"
#include "vdet/synthetic.hpp"
#include "vdet/train.hpp"
#include "vdet/verify.hpp"

namespace vdet {

struct TokenizerConfig {
  int target_vocab_size = 512;
  int max_len = 128;
  bool include_structure_view = true;  // also learn merges over the structure channel
};

struct EnsembleConfig {
  std::vector<InputView> views{InputView::plain};  // one member per view
  Fusion fusion = Fusion::uniform_mean;
  bool tune_threshold = false;
  double threshold = 0.5;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = "out";
  std::vector<std::string> inputs;  // corpus JSONL files for `ingest`
  SplitConfig split;
  TokenizerConfig tokenizer;
  ModelConfig model;
  TrainConfig train;
  EnsembleConfig ensemble;
  JudgeConfig judge;
  SyntheticConfig synthetic;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Parses the TOML subset used by config files: [section] tables, key = value,
/// strings, integers, floats, booleans, flat arrays and # comments.
nlohmann::json parse_toml(std::string_view text, const std::string& where = "config");

/// Parses one override value ("0.5", "true", "[1, 2]", "\"s\"", or a bare word).
nlohmann::json parse_toml_value(std::string_view text);

/// Builds a config from parsed TOML, rejecting unknown sections and keys.
/// `overrides` holds "section.key=value" strings applied on top. Section seeds
/// that are not given fall back to run.seed.
PipelineConfig config_from_toml(const nlohmann::json& doc,
                                const std::vector<std::string>& overrides = {});

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace vdet
