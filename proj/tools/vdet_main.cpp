// Command-line entry point: one subcommand per pipeline stage.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vdet/pipeline.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> overrides;
  std::string log_level = "info";
};

vdet::PipelineConfig resolve_config(const GlobalOptions& g) {
  std::vector<std::string> overrides = g.overrides;
  if (g.seed) overrides.push_back("run.seed=" + std::to_string(*g.seed));
  if (g.threads) overrides.push_back("run.threads=" + std::to_string(*g.threads));
  auto config = g.config_path.empty()
                    ? vdet::config_from_toml(nlohmann::json::object(), overrides)
                    : vdet::load_config(g.config_path, overrides);
  if (g.out_dir) config.out_dir = *g.out_dir;
  return config;
}

vdet::log::Level parse_level(const std::string& name) {
  if (name == "debug") return vdet::log::Level::debug;
  if (name == "info") return vdet::log::Level::info;
  if (name == "warn") return vdet::log::Level::warn;
  if (name == "error") return vdet::log::Level::error;
  throw vdet::Error("unknown log level '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vdet: transformer-based source vulnerability detection"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "Output directory (overrides run.out_dir)");
  app.add_option("--seed", g.seed, "Base seed (overrides run.seed)");
  app.add_option("--threads", g.threads, "Worker threads for prediction")->check(CLI::PositiveNumber);
  app.add_option("--set", g.overrides, "Override one key: section.key=value")->allow_extra_args(false);
  app.add_option("--log-level", g.log_level, "debug, info, warn or error");

  std::vector<std::string> inputs;
  std::vector<std::string> scan_files;

  auto* ingest = app.add_subcommand("ingest", "Validate, dedup and summarize JSONL corpus files");
  ingest->add_option("inputs", inputs, "Corpus JSONL files (default: run.inputs)");
  app.add_subcommand("split", "Assign projects to train/val/test and audit leakage");
  app.add_subcommand("bpe-train", "Learn the subword tokenizer on the train split");
  app.add_subcommand("train", "Train one model per ensemble view");
  app.add_subcommand("eval", "Predict, fuse, threshold and score the test split");
  app.add_subcommand("explain", "Attention-rollout line attribution for positive findings");
  app.add_subcommand("verify", "Re-examine positive findings with the configured judge");
  auto* scan = app.add_subcommand("scan", "Predict, explain and verify ad-hoc source files");
  scan->add_option("files", scan_files, "Source files (.c .h .cpp .py .sol ...)")->required();
  app.add_subcommand("gen-synthetic", "Write a seeded synthetic corpus with planted patterns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    vdet::log::set_level(parse_level(g.log_level));
    const auto config = resolve_config(g);
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    if (name == "gen-synthetic") {
      vdet::stage_gen_synthetic(config);
    } else if (name == "ingest") {
      vdet::stage_ingest(config, inputs.empty() ? config.inputs : inputs);
    } else if (name == "split") {
      vdet::stage_split(config);
    } else if (name == "bpe-train") {
      vdet::stage_bpe_train(config);
    } else if (name == "train") {
      vdet::stage_train(config);
    } else if (name == "eval") {
      vdet::stage_eval(config);
    } else if (name == "explain") {
      vdet::stage_explain(config);
    } else if (name == "verify") {
      vdet::stage_verify(config);
    } else if (name == "scan") {
      const auto result = vdet::stage_scan(config, scan_files);
      if (!result.retained.empty()) {
        vdet::log::warn(std::to_string(result.retained.size()) + " finding(s) retained");
        return 2;
      }
    }
    return 0;
  } catch (const std::exception& e) {
    vdet::log::error(e.what());
    return 1;
  }
}
