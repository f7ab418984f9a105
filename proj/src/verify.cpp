#include "vdet/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vdet/normalize.hpp"

namespace vdet {

using nlohmann::json;

void JudgeConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw Error("judge timeout must be positive");
  if (retries < 0) throw Error("judge retries must be non-negative");
  if (!(overturn_probability_ceiling >= 0.0 && overturn_probability_ceiling <= 1.0))
    throw Error("overturn_probability_ceiling must lie in [0, 1]");
}

namespace {

using Tokens = std::vector<LexToken>;

bool is_punct(const LexToken& t, std::string_view text) {
  return t.kind == TokenKind::punct && t.text == text;
}

bool is_name(const LexToken& t, std::string_view text) {
  return (t.kind == TokenKind::identifier || t.kind == TokenKind::keyword) && t.text == text;
}

// Index of the token closing the bracket opened at `open`, or tokens.size().
std::size_t matching_close(const Tokens& toks, std::size_t open) {
  const std::string& o = toks[open].text;
  const std::string c = o == "(" ? ")" : o == "[" ? "]" : "}";
  int depth = 0;
  for (std::size_t i = open; i < toks.size(); ++i) {
    if (toks[i].kind != TokenKind::punct) continue;
    if (toks[i].text == o) ++depth;
    else if (toks[i].text == c && --depth == 0) return i;
  }
  return toks.size();
}

Tokens code_tokens(std::string_view code, Language lang) {
  Tokens out;
  for (auto& t : lex(code, lang))
    if (t.kind != TokenKind::newline) out.push_back(std::move(t));
  return out;
}

std::string c_rule(const Tokens& toks) {
  static const std::set<std::string, std::less<>> banned = {"gets", "strcpy", "sprintf", "strcat"};
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (toks[i].kind == TokenKind::identifier && banned.count(toks[i].text) &&
        is_punct(toks[i + 1], "(")) {
      // A member access such as obj.strcpy( is some other function.
      if (i > 0 && (is_punct(toks[i - 1], ".") || is_punct(toks[i - 1], "->"))) continue;
      return "unbounded copy call '" + toks[i].text + "' (line " + std::to_string(toks[i].line) + ")";
    }
  }
  return {};
}

bool is_fstring(const std::string& literal) {
  for (char ch : literal) {
    if (ch == '"' || ch == '\'') return false;
    if (ch == 'f' || ch == 'F') return true;
  }
  return false;
}

std::string python_rule(const Tokens& toks) {
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (!(is_name(toks[i], "execute") || is_name(toks[i], "open")) || !is_punct(toks[i + 1], "("))
      continue;
    const std::size_t close = matching_close(toks, i + 1);
    for (std::size_t k = i + 2; k < close; ++k) {
      const auto& t = toks[k];
      const bool concat = is_punct(t, "+") || is_punct(t, "%");
      const bool fmt = is_punct(t, ".") && k + 1 < close && is_name(toks[k + 1], "format");
      const bool fstr = t.kind == TokenKind::string && is_fstring(t.text);
      if (concat || fmt || fstr) {
        return "string built inside '" + toks[i].text + "' call (line " +
               std::to_string(toks[i].line) + ")";
      }
    }
  }
  return {};
}

bool is_assignment(const LexToken& t) {
  static const std::set<std::string, std::less<>> ops = {"=",  "+=", "-=", "*=",  "/=",  "%=",
                                                          "|=", "&=", "^=", "<<=", ">>="};
  return t.kind == TokenKind::punct && ops.count(t.text);
}

bool is_statement_boundary(const LexToken& t) {
  return is_punct(t, ";") || is_punct(t, "{") || is_punct(t, "}");
}

// Contract-level declarations: the last identifier before ';' or '=' at depth 1.
std::set<std::string> state_variables(const Tokens& toks) {
  std::set<std::string> vars;
  int depth = 0;
  std::string last_ident;
  bool in_header = false;  // a function/modifier/event header at depth 1
  int paren = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (is_punct(t, "{")) {
      ++depth;
      in_header = false;
      last_ident.clear();
      continue;
    }
    if (is_punct(t, "}")) {
      --depth;
      last_ident.clear();
      continue;
    }
    if (depth != 1) continue;
    if (is_punct(t, "(")) ++paren;
    if (is_punct(t, ")")) --paren;
    if (t.kind == TokenKind::keyword &&
        (t.text == "function" || t.text == "modifier" || t.text == "event" ||
         t.text == "constructor" || t.text == "struct" || t.text == "enum" || t.text == "error" ||
         t.text == "using")) {
      in_header = true;
    }
    if (paren > 0) continue;
    if (t.kind == TokenKind::identifier) last_ident = t.text;
    if (is_punct(t, ";") || is_punct(t, "=")) {
      if (!in_header && !last_ident.empty()) vars.insert(last_ident);
      if (is_punct(t, ";")) in_header = false;
      last_ident.clear();
      // Skip the initializer so its identifiers are not mistaken for names.
      if (is_punct(t, "=")) {
        while (i + 1 < toks.size() && !is_punct(toks[i + 1], ";")) ++i;
      }
    }
  }
  return vars;
}

std::string solidity_rule(const Tokens& toks) {
  const auto state = state_variables(toks);
  for (std::size_t f = 0; f < toks.size(); ++f) {
    if (!is_name(toks[f], "function")) continue;
    std::size_t open = f;
    while (open < toks.size() && !is_punct(toks[open], "{") && !is_punct(toks[open], ";")) ++open;
    if (open >= toks.size() || is_punct(toks[open], ";")) continue;
    const std::size_t close = matching_close(toks, open);

    std::set<std::string> locals;  // parameters and declared locals
    for (std::size_t k = f + 1; k < open; ++k)
      if (toks[k].kind == TokenKind::identifier && k + 1 < open &&
          (is_punct(toks[k + 1], ",") || is_punct(toks[k + 1], ")")))
        locals.insert(toks[k].text);

    int call_line = 0;
    for (std::size_t k = open + 1; k < close; ++k) {
      const auto& t = toks[k];
      if (!call_line) {
        const bool member_call = is_punct(t, ".") && k + 1 < close &&
                                 (is_name(toks[k + 1], "call") || is_name(toks[k + 1], "send") ||
                                  is_name(toks[k + 1], "delegatecall"));
        if (member_call || is_name(t, "delegatecall")) call_line = t.line;
        continue;
      }
      if (!is_assignment(t)) continue;
      std::size_t start = k;
      while (start > open + 1 && !is_statement_boundary(toks[start - 1])) --start;
      // A declaration ("uint x = ...") has two leading names before the operator.
      std::size_t names = 0;
      bool indexed = false;
      for (std::size_t s = start; s < k; ++s) {
        if (toks[s].kind == TokenKind::identifier || toks[s].kind == TokenKind::keyword) ++names;
        if (is_punct(toks[s], "[")) indexed = true;
        if (is_punct(toks[s], "[") || is_punct(toks[s], ".")) break;
      }
      const auto& root = toks[start];
      if (root.kind != TokenKind::identifier) continue;
      if (names >= 2 && !indexed) {
        locals.insert(toks[k - 1].text);
        continue;
      }
      const bool hits_state = state.empty()
                                  ? (indexed || !locals.count(root.text))
                                  : state.count(root.text) > 0;
      if (hits_state) {
        return "external call (line " + std::to_string(call_line) +
               ") before state write to '" + root.text + "' (line " + std::to_string(root.line) +
               ")";
      }
    }
  }
  return {};
}

}  // namespace

std::string heuristic_rule(std::string_view code, Language language) {
  const auto toks = code_tokens(code, language);
  switch (language) {
    case Language::c:
    case Language::cpp: return c_rule(toks);
    case Language::python: return python_rule(toks);
    case Language::solidity: return solidity_rule(toks);
  }
  return {};
}

Verdict judge_heuristic(const Finding& finding, std::string_view raw_code, Language language,
                        double ceiling) {
  Verdict v;
  v.judge = JudgeKind::heuristic;
  std::string rule;
  try {
    rule = heuristic_rule(raw_code, language);
  } catch (const Error& e) {
    v.decision = Decision::uncertain;
    v.rationale = std::string("code could not be lexed: ") + e.what();
    v.confidence = 0.0;
    return v;
  }
  if (!rule.empty()) {
    v.decision = Decision::confirmed;
    v.rationale = rule;
    v.confidence = 0.9;
  } else if (finding.p_vuln < ceiling) {
    v.decision = Decision::overturned;
    v.rationale = "no rule supports the finding and p_vuln is below the ceiling";
    v.confidence = 0.6;
  } else {
    v.decision = Decision::uncertain;
    v.rationale = "no rule fires but p_vuln is at or above the ceiling; needs review";
    v.confidence = 0.5;
  }
  return v;
}

namespace {

Verdict remote_failure(const std::string& why) {
  Verdict v;
  v.decision = Decision::uncertain;
  v.judge = JudgeKind::remote;
  v.rationale = "remote judge failed: " + why;
  return v;
}

std::string env_or(const std::string& value, const char* name) {
  if (!value.empty()) return value;
  const char* env = std::getenv(name);
  return env ? env : "";
}

}  // namespace

Verdict judge_remote(const JudgeRequest& request, const JudgeConfig& config) {
  try {
    const std::string url = env_or(config.endpoint, "VDET_JUDGE_URL");
    if (url.empty()) return remote_failure("no endpoint configured");
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return remote_failure("endpoint is not a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string base = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    const Finding& f = *request.finding;
    json top = json::array();
    if (f.explanation)
      for (const auto& lw : f.explanation->top_k) top.push_back({{"line", lw.line}, {"weight", lw.weight}});
    const json body = {{"id", f.id},
                       {"language", std::string(to_string(request.language))},
                       {"code", request.code},
                       {"predicted_label", f.label},
                       {"p_vuln", f.p_vuln},
                       {"cwe_hints", request.cwe_hints},
                       {"top_lines", top}};

    httplib::Client client(base);
    const auto secs = static_cast<time_t>(config.timeout_seconds);
    const auto usecs = static_cast<time_t>((config.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    const std::string token = env_or(config.token, "VDET_JUDGE_TOKEN");
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
      auto res = client.Post(path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "transport failure (" + httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP status " + std::to_string(res->status);
        if (res->status >= 500) continue;
        return remote_failure(last_error);
      }
      json reply;
      try {
        reply = json::parse(res->body);
      } catch (const json::parse_error&) {
        return remote_failure("malformed response body");
      }
      if (!reply.is_object() || !reply.contains("verdict") || !reply["verdict"].is_string())
        return remote_failure("response lacks a verdict");
      const auto verdict = reply["verdict"].get<std::string>();
      Verdict v;
      v.judge = JudgeKind::remote;
      if (verdict == "confirmed") v.decision = Decision::confirmed;
      else if (verdict == "overturned") v.decision = Decision::overturned;
      else if (verdict == "uncertain") v.decision = Decision::uncertain;
      else return remote_failure("unknown verdict '" + verdict + "'");
      v.rationale = reply.value("rationale", std::string());
      if (reply.contains("confidence") && reply["confidence"].is_number())
        v.confidence = std::clamp(reply["confidence"].get<double>(), 0.0, 1.0);
      if (v.decision == Decision::uncertain && v.rationale.empty())
        v.rationale = "remote judge gave no rationale";
      return v;
    }
    return remote_failure(last_error + " after " + std::to_string(config.retries + 1) + " attempts");
  } catch (const std::exception& e) {
    return remote_failure(e.what());
  }
}

VerificationResult apply_verification(const std::vector<Finding>& findings,
                                      const std::map<std::string, const CodeSample*>& samples,
                                      const JudgeConfig& config) {
  config.validate();
  VerificationResult out;
  out.findings = findings;
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < findings.size(); ++i)
    if (findings[i].label == 1) positives.push_back(i);

  std::vector<Verdict> verdicts(positives.size());
  auto judge_one = [&](std::size_t n) {
    const Finding& f = findings[positives[n]];
    auto it = samples.find(f.id);
    if (it == samples.end() || !it->second) {
      Verdict v;
      v.judge = config.mode;
      v.rationale = "source of finding '" + f.id + "' is unavailable";
      verdicts[n] = v;
      return;
    }
    const CodeSample& s = *it->second;
    if (config.mode == JudgeKind::heuristic) {
      verdicts[n] = judge_heuristic(f, s.code, s.language, config.overturn_probability_ceiling);
    } else {
      verdicts[n] = judge_remote(JudgeRequest{&f, s.code, s.language, s.cwes}, config);
    }
  };

  if (config.mode == JudgeKind::remote && positives.size() > 1) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(4, positives.size());
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t n; (n = next++) < positives.size();) judge_one(n);
      });
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t n = 0; n < positives.size(); ++n) judge_one(n);
  }

  auto& r = out.report;
  r.positives_before = positives.size();
  for (std::size_t n = 0; n < positives.size(); ++n) {
    Finding& f = out.findings[positives[n]];
    f.verdict = verdicts[n];
    ++r.judged;
    switch (verdicts[n].decision) {
      case Decision::confirmed: ++r.confirmed; break;
      case Decision::overturned:
        ++r.overturned;
        f.label = 0;
        break;
      case Decision::uncertain: ++r.uncertain; break;
    }
  }
  r.positives_after = r.confirmed + r.uncertain;
  r.rate_undefined = r.judged == 0;
  r.verification_rate = r.judged ? static_cast<double>(r.confirmed) / static_cast<double>(r.judged) : 0.0;
  return out;
}

std::string verification_to_json(const VerificationResult& result) {
  const auto& r = result.report;
  json per = json::array();
  for (const auto& f : result.findings) {
    if (!f.verdict) continue;
    per.push_back({{"id", f.id},
                   {"p_vuln", f.p_vuln},
                   {"decision", std::string(to_string(f.verdict->decision))},
                   {"review", f.verdict->decision == Decision::uncertain},
                   {"rationale", f.verdict->rationale},
                   {"confidence", f.verdict->confidence},
                   {"judge", std::string(to_string(f.verdict->judge))}});
  }
  json j = {{"counts",
             {{"judged", r.judged},
              {"confirmed", r.confirmed},
              {"overturned", r.overturned},
              {"uncertain", r.uncertain}}},
            {"positives_before", r.positives_before},
            {"positives_after", r.positives_after},
            {"verification_rate", r.verification_rate},
            {"verification_rate_undefined", r.rate_undefined},
            {"verdicts", per}};
  return j.dump(2) + "\n";
}

}  // namespace vdet
