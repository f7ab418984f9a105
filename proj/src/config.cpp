#include "vdet/config.hpp"

#include <cctype>
#include <set>
#include <sstream>

namespace vdet {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

class ValueParser {
 public:
  explicit ValueParser(std::string_view text) : s_(text) {}

  json parse_all() {
    json v = parse();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    throw Error("invalid value '" + std::string(s_) + "': " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  json parse() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"' || c == '\'') return parse_string(c);
    if (c == '[') return parse_array();
    return parse_scalar();
  }

  json parse_string(char quote) {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != quote) {
      char c = s_[pos_++];
      if (c == '\\' && quote == '"') {
        if (pos_ >= s_.size()) fail("dangling escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '\\': c = '\\'; break;
          case '"': c = '"'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  json parse_array() {
    json arr = json::array();
    ++pos_;
    for (;;) {
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      fail("expected ',' or ']'");
    }
  }

  json parse_scalar() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
    std::string word(s_.substr(start, pos_ - start));
    if (word == "true") return true;
    if (word == "false") return false;
    std::string digits;
    for (char ch : word)
      if (ch != '_') digits.push_back(ch);
    const bool is_float = digits.find_first_of(".eE") != std::string::npos &&
                          digits.find_first_of("0123456789") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double d = std::stod(digits, &used);
        if (used == digits.size()) return d;
      } else if (!digits.empty() && digits[0] == '-') {
        const long long v = std::stoll(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const unsigned long long v = std::stoull(digits, &used);
        if (used == digits.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("not a number, boolean, string or array");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

// Drops a trailing # comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

// Reads typed values out of one section and remembers which keys were used.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) obj_ = doc.at(name_);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error("config key " + name_ + "." + key + " has the wrong type");
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  void finish() const {
    for (const auto& [key, _] : obj_.items())
      if (!seen_.count(key)) throw Error("unknown config key " + name_ + "." + key);
  }

 private:
  std::string name_;
  json obj_ = json::object();
  std::set<std::string> seen_;
};

}  // namespace

json parse_toml_value(std::string_view text) {
  text = trim(text);
  try {
    return ValueParser(text).parse_all();
  } catch (const Error&) {
    // Bare words are accepted as strings on the command line.
    if (!text.empty() && text.find_first_of("[]\"', ") == std::string_view::npos)
      return std::string(text);
    throw;
  }
}

json parse_toml(std::string_view text, const std::string& where) {
  json doc = json::object();
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string at = where + ":" + std::to_string(lineno) + ": ";
    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(at + "malformed table header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!valid_key(section)) throw Error(at + "invalid table name '" + section + "'");
      if (doc.contains(section)) throw Error(at + "table [" + section + "] defined twice");
      doc[section] = json::object();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(at + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (!valid_key(key)) throw Error(at + "invalid key '" + key + "'");
    if (section.empty()) throw Error(at + "key '" + key + "' outside of a table");
    json& table = doc[section];
    if (table.contains(key)) throw Error(at + "key '" + key + "' set twice");
    try {
      table[key] = ValueParser(trim(line.substr(eq + 1))).parse_all();
    } catch (const Error& e) {
      throw Error(at + e.what());
    }
  }
  return doc;
}

PipelineConfig config_from_toml(const json& source, const std::vector<std::string>& overrides) {
  json doc = source;
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    const auto dot = ov.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw Error("override '" + ov + "' is not of the form section.key=value");
    const std::string sec(trim(std::string_view(ov).substr(0, dot)));
    const std::string key(trim(std::string_view(ov).substr(dot + 1, eq - dot - 1)));
    doc[sec][key] = parse_toml_value(std::string_view(ov).substr(eq + 1));
  }

  static const std::set<std::string> sections = {"run",   "split",    "tokenizer", "model",
                                                 "train", "ensemble", "judge",     "synthetic"};
  for (const auto& [name, _] : doc.items())
    if (!sections.count(name)) throw Error("unknown config section [" + name + "]");

  PipelineConfig c;
  {
    Section s(doc, "run");
    s.get("seed", c.seed);
    s.get("threads", c.threads);
    s.get("out_dir", c.out_dir);
    s.get("inputs", c.inputs);
    s.finish();
  }
  {
    Section s(doc, "split");
    std::vector<double> ratios(c.split.ratios.begin(), c.split.ratios.end());
    s.get("ratios", ratios);
    if (ratios.size() != 3) throw Error("split.ratios needs three values");
    for (int i = 0; i < 3; ++i) c.split.ratios[i] = ratios[i];
    c.split.seed = c.seed;
    s.get("seed", c.split.seed);
    s.finish();
  }
  {
    Section s(doc, "tokenizer");
    s.get("target_vocab_size", c.tokenizer.target_vocab_size);
    s.get("max_len", c.tokenizer.max_len);
    s.get("include_structure_view", c.tokenizer.include_structure_view);
    s.finish();
  }
  {
    Section s(doc, "model");
    s.get("d_model", c.model.d_model);
    s.get("n_heads", c.model.n_heads);
    s.get("n_layers", c.model.n_layers);
    s.get("d_ffn", c.model.d_ffn);
    s.get("dropout", c.model.dropout);
    s.finish();
    c.model.max_len = c.tokenizer.max_len;
  }
  {
    Section s(doc, "train");
    auto& t = c.train;
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("lr", t.lr);
    s.get("beta1", t.beta1);
    s.get("beta2", t.beta2);
    s.get("adam_eps", t.adam_eps);
    s.get("grad_clip_norm", t.grad_clip_norm);
    s.get("label_smoothing", t.label_smoothing);
    std::string mode(to_string(t.class_weight_mode));
    s.get("class_weight_mode", mode);
    t.class_weight_mode = parse_class_weight_mode(mode);
    s.get("oversample", t.oversample);
    t.seed = c.seed;
    s.get("seed", t.seed);
    s.get("early_stop_patience", t.early_stop_patience);
    s.finish();
  }
  {
    Section s(doc, "ensemble");
    std::vector<std::string> views;
    for (auto v : c.ensemble.views) views.emplace_back(to_string(v));
    s.get("views", views);
    c.ensemble.views.clear();
    for (const auto& v : views) c.ensemble.views.push_back(parse_input_view(v));
    std::string fusion(to_string(c.ensemble.fusion));
    s.get("fusion", fusion);
    c.ensemble.fusion = parse_fusion(fusion);
    s.get("tune_threshold", c.ensemble.tune_threshold);
    s.get("threshold", c.ensemble.threshold);
    s.finish();
  }
  {
    Section s(doc, "judge");
    std::string mode(to_string(c.judge.mode));
    s.get("mode", mode);
    if (mode == "heuristic") c.judge.mode = JudgeKind::heuristic;
    else if (mode == "remote") c.judge.mode = JudgeKind::remote;
    else throw Error("unknown judge.mode '" + mode + "'");
    s.get("endpoint", c.judge.endpoint);
    s.get("timeout", c.judge.timeout_seconds);
    s.get("retries", c.judge.retries);
    s.get("overturn_probability_ceiling", c.judge.overturn_probability_ceiling);
    s.finish();
  }
  {
    Section s(doc, "synthetic");
    s.get("n_samples", c.synthetic.n_samples);
    s.get("n_projects", c.synthetic.n_projects);
    s.get("vuln_fraction", c.synthetic.vuln_fraction);
    s.get("decoy_rate", c.synthetic.decoy_rate);
    c.synthetic.seed = c.seed;
    s.get("seed", c.synthetic.seed);
    s.finish();
  }
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  if (threads < 1) throw Error("run.threads must be at least 1");
  split.validate();
  if (tokenizer.max_len < 3 || tokenizer.max_len > 512)
    throw Error("tokenizer.max_len must lie in [3, 512]");
  if (tokenizer.target_vocab_size <= special::count)
    throw Error("tokenizer.target_vocab_size is too small");
  train.validate();
  if (ensemble.views.empty()) throw Error("ensemble.views needs at least one view");
  if (!(ensemble.threshold >= 0.0 && ensemble.threshold <= 1.0))
    throw Error("ensemble.threshold must lie in [0, 1]");
  judge.validate();
  synthetic.validate();
  ModelConfig probe = model;
  probe.vocab_size = tokenizer.target_vocab_size;
  probe.validate();
}

json PipelineConfig::to_json() const {
  json views = json::array();
  for (auto v : ensemble.views) views.push_back(std::string(to_string(v)));
  return {{"run", {{"seed", seed}, {"threads", threads}, {"out_dir", out_dir}, {"inputs", inputs}}},
          {"split", {{"ratios", split.ratios}, {"seed", split.seed}}},
          {"tokenizer",
           {{"target_vocab_size", tokenizer.target_vocab_size},
            {"max_len", tokenizer.max_len},
            {"include_structure_view", tokenizer.include_structure_view}}},
          {"model", model.to_json()},
          {"train", train.to_json()},
          {"ensemble",
           {{"views", views},
            {"fusion", std::string(to_string(ensemble.fusion))},
            {"tune_threshold", ensemble.tune_threshold},
            {"threshold", ensemble.threshold}}},
          {"judge",
           {{"mode", std::string(to_string(judge.mode))},
            {"endpoint", judge.endpoint},
            {"timeout", judge.timeout_seconds},
            {"retries", judge.retries},
            {"overturn_probability_ceiling", judge.overturn_probability_ceiling}}},
          {"synthetic",
           {{"n_samples", synthetic.n_samples},
            {"n_projects", synthetic.n_projects},
            {"vuln_fraction", synthetic.vuln_fraction},
            {"decoy_rate", synthetic.decoy_rate},
            {"seed", synthetic.seed}}}};
}

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  return config_from_toml(parse_toml(read_file(path), path), overrides);
}

}  // namespace vdet
