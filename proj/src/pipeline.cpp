#include "vdet/pipeline.hpp"

#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

namespace vdet {

using nlohmann::json;
namespace fs = std::filesystem;

std::string artifact_path(const PipelineConfig& config, const std::string& name) {
  return (fs::path(config.out_dir) / name).string();
}

std::string checkpoint_name(InputView view) {
  return "model_" + std::string(to_string(view)) + ".ckpt";
}

namespace {

void ensure_out_dir(const PipelineConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw Error("cannot create output directory " + config.out_dir + ": " + ec.message());
}

std::string require_artifact(const PipelineConfig& config, const std::string& name,
                             const std::string& producer) {
  const auto path = artifact_path(config, name);
  if (!fs::exists(path))
    throw Error("missing " + path + "; run `vdet " + producer + "` first");
  return path;
}

DatasetManifest load_corpus(const PipelineConfig& config) {
  return ingest({require_artifact(config, artifact::corpus, "ingest")});
}

SplitAssignment load_split(const PipelineConfig& config) {
  return assignment_from_json(read_file(require_artifact(config, artifact::split, "split")));
}

BpeModel load_tokenizer(const PipelineConfig& config) {
  return BpeModel::from_json(read_file(require_artifact(config, artifact::tokenizer, "bpe-train")));
}

std::string loss_prefix(const PipelineConfig& config, std::size_t member) {
  // The first member's logs keep the plain file names.
  return member == 0 ? "" : std::string(to_string(config.ensemble.views[member])) + "_";
}

std::map<std::string, const CodeSample*> index_by_id(const std::vector<CodeSample>& samples) {
  std::map<std::string, const CodeSample*> out;
  for (const auto& s : samples) out[s.id] = &s;
  return out;
}

std::map<std::string, int> labels_by_id(const std::vector<CodeSample>& samples) {
  std::map<std::string, int> out;
  for (const auto& s : samples) out[s.id] = s.label;
  return out;
}

void write_metrics(const std::string& path, const ConfusionMatrix& cm, double threshold) {
  json j = json::parse(metrics_to_json(metrics(cm), cm));
  j["threshold"] = threshold;
  write_file(path, j.dump(2) + "\n");
}

}  // namespace

DatasetManifest stage_gen_synthetic(const PipelineConfig& config) {
  ensure_out_dir(config);
  auto manifest = generate_synthetic(config.synthetic);
  write_jsonl(artifact_path(config, artifact::synthetic), manifest);
  log::info("wrote " + std::to_string(manifest.samples.size()) + " synthetic samples");
  return manifest;
}

DatasetManifest stage_ingest(const PipelineConfig& config, const std::vector<std::string>& paths) {
  if (paths.empty()) throw Error("ingest needs at least one input file");
  ensure_out_dir(config);
  const auto raw = ingest(paths);
  auto deduped = dedup(raw);
  write_jsonl(artifact_path(config, artifact::corpus), deduped);
  write_file(artifact_path(config, artifact::summary), summary_to_json(summarize(deduped)));
  log::info("ingested " + std::to_string(raw.samples.size()) + " samples, kept " +
            std::to_string(deduped.samples.size()));
  return deduped;
}

SplitAssignment stage_split(const PipelineConfig& config) {
  ensure_out_dir(config);
  const auto manifest = load_corpus(config);
  auto assignment = split_projects(manifest, config.split);
  for (const auto& w : assignment.warnings) log::warn(w);
  const auto leakage = check_leakage(manifest, assignment);
  write_file(artifact_path(config, artifact::split), assignment_to_json(assignment));
  write_file(artifact_path(config, artifact::leakage), leakage_to_json(leakage));
  if (!leakage.clean()) log::warn("leakage report is not clean");
  return assignment;
}

BpeModel stage_bpe_train(const PipelineConfig& config) {
  ensure_out_dir(config);
  const auto train_samples = select_split(load_corpus(config), load_split(config), Split::train);
  std::vector<std::string> texts;
  for (const auto& s : train_samples) {
    const auto unit = normalize(s.code, s.language);
    texts.push_back(unit.text);
    if (config.tokenizer.include_structure_view) texts.push_back(structure_view(unit).text);
  }
  auto bpe = bpe_train(texts, config.tokenizer.target_vocab_size);
  write_file(artifact_path(config, artifact::tokenizer), bpe.to_json());
  log::info("tokenizer vocabulary " + std::to_string(bpe.vocab_size()) + " symbols, " +
            std::to_string(bpe.merges().size()) + " merges");
  return bpe;
}

std::vector<TrainResult> stage_train(const PipelineConfig& config) {
  ensure_out_dir(config);
  const auto manifest = load_corpus(config);
  const auto assignment = load_split(config);
  const auto bpe = load_tokenizer(config);
  std::vector<TrainResult> out;
  for (std::size_t m = 0; m < config.ensemble.views.size(); ++m) {
    TrainConfig tcfg = config.train;
    tcfg.view = config.ensemble.views[m];
    log::info("training member '" + std::string(to_string(tcfg.view)) + "'");
    auto result = train(manifest, assignment, bpe, config.model, tcfg);
    save_checkpoint(artifact_path(config, checkpoint_name(tcfg.view)), result.checkpoint);
    write_loss_logs(config.out_dir, result, loss_prefix(config, m));
    out.push_back(std::move(result));
  }
  return out;
}

std::vector<ModelCheckpoint> load_members(const PipelineConfig& config) {
  std::vector<ModelCheckpoint> out;
  for (auto view : config.ensemble.views)
    out.push_back(load_checkpoint(require_artifact(config, checkpoint_name(view), "train")));
  return out;
}

std::vector<Finding> ensemble_findings(const PipelineConfig& config,
                                       const std::vector<ModelCheckpoint>& members,
                                       const BpeModel& bpe, const std::vector<CodeSample>& samples,
                                       double threshold) {
  EnsembleSpec spec;
  spec.fusion = config.ensemble.fusion;
  for (std::size_t m = 0; m < members.size(); ++m) {
    spec.members.push_back(checkpoint_name(config.ensemble.views[m]));
    spec.member_f1.push_back(members[m].meta.best_val_f1);
  }
  std::vector<std::vector<double>> per_member;
  for (const auto& ckpt : members) per_member.push_back(predict_many(ckpt, bpe, samples, config.threads));

  std::vector<Finding> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<double> ps;
    for (const auto& pm : per_member) ps.push_back(pm[i]);
    const double p = fuse(ps, spec);
    out.push_back(make_finding(samples[i].id, p, threshold, ps.size() > 1 ? ps : std::vector<double>{}));
  }
  return out;
}

EvalResult stage_eval(const PipelineConfig& config) {
  ensure_out_dir(config);
  const auto manifest = load_corpus(config);
  const auto assignment = load_split(config);
  const auto bpe = load_tokenizer(config);
  const auto members = load_members(config);

  EvalResult result;
  result.threshold = config.ensemble.threshold;
  if (config.ensemble.tune_threshold) {
    const auto val = select_split(manifest, assignment, Split::val);
    const auto val_findings = ensemble_findings(config, members, bpe, val, 0.5);
    std::vector<std::pair<double, int>> pairs;
    for (std::size_t i = 0; i < val.size(); ++i) pairs.emplace_back(val_findings[i].p_vuln, val[i].label);
    result.threshold = tune_threshold(pairs);
    log::info("tuned threshold " + std::to_string(result.threshold));
  }

  const auto test = select_split(manifest, assignment, Split::test);
  if (test.empty()) throw Error("the test split is empty");
  result.findings = ensemble_findings(config, members, bpe, test, result.threshold);
  result.cm = confusion(result.findings, labels_by_id(test));
  result.report = metrics(result.cm);

  write_file(artifact_path(config, artifact::findings), findings_to_jsonl(result.findings));
  write_metrics(artifact_path(config, artifact::metrics), result.cm, result.threshold);
  write_file(artifact_path(config, artifact::confusion), confusion_to_csv(result.cm));
  log::info("test accuracy " + std::to_string(result.report.accuracy) + " f1 " +
            std::to_string(result.report.f1));
  return result;
}

std::vector<Finding> stage_explain(const PipelineConfig& config) {
  ensure_out_dir(config);
  const auto bpe = load_tokenizer(config);
  const auto members = load_members(config);
  auto findings = read_findings(require_artifact(config, artifact::findings, "eval"));
  const auto corpus = load_corpus(config);
  const auto by_id = index_by_id(corpus.samples);

  std::string out;
  for (auto& f : findings) {
    if (f.label != 1) continue;
    auto it = by_id.find(f.id);
    if (it == by_id.end()) throw Error("finding '" + f.id + "' is not in the corpus");
    f.explanation = explain_sample(members.front(), bpe, *it->second);
    out += explanation_to_json_line(f.id, *f.explanation);
  }
  write_file(artifact_path(config, artifact::explanations), out);
  return findings;
}

VerifyStageResult stage_verify(const PipelineConfig& config) {
  ensure_out_dir(config);
  auto findings = read_findings(require_artifact(config, artifact::findings, "eval"));
  const auto corpus = load_corpus(config);
  const auto by_id = index_by_id(corpus.samples);

  // Attach explanations when `explain` has run, so a remote judge sees top lines.
  const auto explanations_path = artifact_path(config, artifact::explanations);
  if (fs::exists(explanations_path)) {
    std::map<std::string, Explanation> ex;
    std::istringstream in(read_file(explanations_path));
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      Explanation e;
      for (const auto& t : j.at("top_lines"))
        e.top_k.push_back({t.at("line").get<int>(), t.at("weight").get<double>()});
      ex[j.at("id").get<std::string>()] = std::move(e);
    }
    for (auto& f : findings) {
      auto it = ex.find(f.id);
      if (it != ex.end()) f.explanation = it->second;
    }
  }

  VerifyStageResult out;
  out.verification = apply_verification(findings, by_id, config.judge);
  std::map<std::string, int> labels;
  for (const auto& f : findings) {
    auto it = by_id.find(f.id);
    if (it == by_id.end()) throw Error("finding '" + f.id + "' is not in the corpus");
    labels[f.id] = it->second->label;
  }
  out.before = confusion(findings, labels);
  out.after = confusion(out.verification.findings, labels);
  const double threshold = findings.empty() ? config.ensemble.threshold : findings.front().threshold;

  write_file(artifact_path(config, artifact::verification), verification_to_json(out.verification));
  write_file(artifact_path(config, artifact::verified_findings),
             findings_to_jsonl(out.verification.findings));
  if (out.after.total() > 0)
    write_metrics(artifact_path(config, artifact::verified_metrics), out.after, threshold);
  const auto& r = out.verification.report;
  log::info("verified " + std::to_string(r.judged) + " positives: " + std::to_string(r.confirmed) +
            " confirmed, " + std::to_string(r.overturned) + " overturned, " +
            std::to_string(r.uncertain) + " uncertain");
  return out;
}

ScanResult stage_scan(const PipelineConfig& config, const std::vector<std::string>& files) {
  if (files.empty()) throw Error("scan needs at least one source file");
  ensure_out_dir(config);
  const auto bpe = load_tokenizer(config);
  const auto members = load_members(config);

  std::vector<CodeSample> samples;
  for (const auto& path : files) {
    CodeSample s;
    s.id = path;
    s.language = language_from_extension(path);
    s.project = "scan";
    s.file_path = path;
    s.code = read_file(path);
    s.origin = "scan";
    samples.push_back(std::move(s));
  }
  auto findings = ensemble_findings(config, members, bpe, samples, config.ensemble.threshold);
  const auto by_id = index_by_id(samples);
  std::string explanations;
  for (auto& f : findings) {
    if (f.label != 1) continue;
    const auto& s = *by_id.at(f.id);
    if (!normalize(s.code, s.language).tokens.empty()) {
      f.explanation = explain_sample(members.front(), bpe, s);
      explanations += explanation_to_json_line(f.id, *f.explanation);
    }
  }
  auto verification = apply_verification(findings, by_id, config.judge);

  ScanResult out;
  out.report = verification.report;
  for (const auto& f : verification.findings)
    if (f.label == 1) out.retained.push_back(f);
  write_file(artifact_path(config, artifact::findings), findings_to_jsonl(out.retained));
  write_file(artifact_path(config, artifact::explanations), explanations);
  write_file(artifact_path(config, artifact::verification), verification_to_json(verification));
  return out;
}

}  // namespace vdet
