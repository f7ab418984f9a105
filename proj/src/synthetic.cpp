#include "vdet/synthetic.hpp"

#include <array>
#include <cstdio>
#include <vector>

#include "vdet/rng.hpp"

namespace vdet {

void SyntheticConfig::validate() const {
  if (n_projects < 3) throw Error("synthetic corpus needs at least 3 projects");
  if (n_samples < n_projects) throw Error("synthetic corpus needs at least one sample per project");
  if (!(vuln_fraction > 0.0 && vuln_fraction < 1.0)) throw Error("vuln_fraction must lie in (0, 1)");
  if (!(decoy_rate >= 0.0 && decoy_rate <= 1.0)) throw Error("decoy_rate must lie in [0, 1]");
}

namespace {

enum class Family { c_like, python, solidity };

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.below(items.size())];
}

std::string num(Rng& rng, int lo, int hi) {
  return std::to_string(lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))));
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

// A planted pattern: the lines to insert and the judge-relevant metadata.
struct Core {
  std::string kind;  // e.g. "strcpy"
  std::vector<std::string> lines;
  std::vector<std::string> cwes;
};

const std::vector<std::string> kBufNames = {"buf", "dst", "out", "line", "dest", "target"};
const std::vector<std::string> kSrcNames = {"src", "input", "name", "text", "arg", "value"};
const std::vector<std::string> kCounterNames = {"count", "total", "limit", "width", "index", "retries"};

std::vector<std::string> c_fillers(Rng& rng, int n, const std::string& ind) {
  std::vector<std::string> out;
  for (int k = 0; k < n; ++k) {
    const std::string v = pick(rng, kCounterNames) + "_" + std::to_string(k);
    switch (rng.below(9)) {
      case 0: out.push_back(ind + "int " + v + " = " + num(rng, 0, 64) + ";"); break;
      case 6:
        out.push_back(ind + "while (pending() > " + num(rng, 0, 4) + ") {");
        out.push_back(ind + "    drain();");
        out.push_back(ind + "}");
        break;
      case 7: out.push_back(ind + "const char *" + v + " = getenv(\"MODE\");"); break;
      case 8:
        out.push_back(ind + "if (!ready()) {");
        out.push_back(ind + "    return;");
        out.push_back(ind + "}");
        break;
      case 1:
        out.push_back(ind + "int " + v + " = " + num(rng, 1, 9) + ";");
        out.push_back(ind + "if (" + v + " > " + num(rng, 2, 30) + ") {");
        out.push_back(ind + "    " + v + " = 0;");
        out.push_back(ind + "}");
        break;
      case 2: out.push_back(ind + "log_event(" + num(rng, 1, 99) + ");"); break;
      case 3:
        out.push_back(ind + "for (int i = 0; i < " + num(rng, 2, 16) + "; i++) {");
        out.push_back(ind + "    tick(i);");
        out.push_back(ind + "}");
        break;
      case 4: out.push_back(ind + "unsigned " + v + " = checksum(" + num(rng, 3, 40) + ");"); break;
      default: out.push_back(ind + "assert(state_ok());"); break;
    }
  }
  return out;
}

Core c_core(Rng& rng, const std::string& kind, const std::string& dst, const std::string& src,
            const std::string& ind) {
  // Vulnerable calls, their bounded counterparts, and look-alike decoys.
  if (kind == "vuln:strcpy") return {kind, {ind + "strcpy(" + dst + ", " + src + ");"}, {"CWE-120"}};
  if (kind == "vuln:strcat") return {kind, {ind + "strcat(" + dst + ", " + src + ");"}, {"CWE-120"}};
  if (kind == "vuln:gets") return {kind, {ind + "gets(" + dst + ");"}, {"CWE-242"}};
  if (kind == "vuln:sprintf")
    return {kind, {ind + "sprintf(" + dst + ", \"%s\", " + src + ");"}, {"CWE-119"}};
  if (kind == "safe:strcpy")
    return {kind, {ind + "strncpy(" + dst + ", " + src + ", sizeof(" + dst + ") - 1);"}, {}};
  if (kind == "safe:strcat")
    return {kind,
            {ind + "strncat(" + dst + ", " + src + ", sizeof(" + dst + ") - strlen(" + dst + ") - 1);"},
            {}};
  if (kind == "safe:gets") return {kind, {ind + "fgets(" + dst + ", sizeof(" + dst + "), stdin);"}, {}};
  if (kind == "safe:sprintf")
    return {kind, {ind + "snprintf(" + dst + ", sizeof(" + dst + "), \"%s\", " + src + ");"}, {}};
  if (kind == "decoy:strcpy") return {kind, {ind + "copy_text(" + dst + ", " + src + ");"}, {}};
  if (kind == "decoy:strcat") return {kind, {ind + "append_text(" + dst + ", " + src + ");"}, {}};
  if (kind == "decoy:gets") return {kind, {ind + "read_record(" + dst + ");"}, {}};
  if (kind == "decoy:sprintf")
    return {kind, {ind + "format_text(" + dst + ", \"%s\", " + src + ");"}, {}};
  (void)rng;
  throw Error("unknown C pattern " + kind);
}

std::string c_unit(Rng& rng, const std::string& kind, bool cpp, const std::string& fname) {
  const std::string dst = pick(rng, kBufNames), src = pick(rng, kSrcNames);
  const std::string ind = cpp ? "        " : "    ";
  std::vector<std::string> lines;
  if (cpp) {
    lines.push_back("namespace app {");
    lines.push_back("");
    lines.push_back("    void Handler::" + fname + "(const char *" + src + ") {");
  } else {
    lines.push_back("static void " + fname + "(const char *" + src + ")");
    lines.push_back("{");
  }
  lines.push_back(ind + "char " + dst + "[" + num(rng, 16, 256) + "];");
  const int before = static_cast<int>(rng.below(4)), after = static_cast<int>(rng.below(4));
  for (auto& l : c_fillers(rng, before, ind)) lines.push_back(l);
  for (auto& l : c_core(rng, kind, dst, src, ind).lines) lines.push_back(l);
  for (auto& l : c_fillers(rng, after, ind)) lines.push_back(l);
  lines.push_back(ind + "emit(" + dst + ");");
  if (cpp) {
    lines.push_back("    }");
    lines.push_back("");
    lines.push_back("}  // namespace app");
  } else {
    lines.push_back("}");
  }
  return join_lines(lines);
}

std::vector<std::string> py_fillers(Rng& rng, int n) {
  std::vector<std::string> out;
  for (int k = 0; k < n; ++k) {
    const std::string v = pick(rng, kCounterNames) + "_" + std::to_string(k);
    switch (rng.below(8)) {
      case 0: out.push_back("    " + v + " = " + num(rng, 0, 64)); break;
      case 5:
        out.push_back("    if not conn:");
        out.push_back("        raise ValueError(\"no connection\")");
        break;
      case 6: out.push_back("    " + v + " = [x for x in items if x]"); break;
      case 7:
        out.push_back("    with lock:");
        out.push_back("        " + v + " = state.snapshot()");
        break;
      case 1:
        out.push_back("    " + v + " = settings.get(\"" + pick(rng, kCounterNames) + "\")");
        out.push_back("    if " + v + " is None:");
        out.push_back("        " + v + " = " + num(rng, 1, 9));
        break;
      case 2: out.push_back("    log.debug(\"step " + num(rng, 1, 9) + "\")"); break;
      case 3:
        out.push_back("    for i in range(" + num(rng, 2, 9) + "):");
        out.push_back("        tick(i)");
        break;
      default: out.push_back("    " + v + " = max(" + v.substr(0, v.size() - 2) + "_base, " + num(rng, 1, 9) + ")"); break;
    }
  }
  return out;
}

Core py_core(const std::string& kind, const std::string& arg) {
  const std::string q = "\"SELECT * FROM users WHERE name = '\" + " + arg + " + \"'\"";
  if (kind == "vuln:sql_concat")
    return {kind, {"    cursor = conn.cursor()", "    cursor.execute(" + q + ")"}, {"CWE-89"}};
  if (kind == "vuln:sql_percent")
    return {kind,
            {"    cursor = conn.cursor()",
             "    cursor.execute(\"SELECT * FROM users WHERE name = '%s'\" % " + arg + ")"},
            {"CWE-89"}};
  if (kind == "vuln:sql_format")
    return {kind,
            {"    cursor = conn.cursor()",
             "    cursor.execute(\"DELETE FROM items WHERE owner = '{}'\".format(" + arg + "))"},
            {"CWE-89"}};
  if (kind == "vuln:path")
    return {kind, {"    handle = open(base_dir + \"/\" + " + arg + ")"}, {"CWE-22"}};
  if (kind == "safe:sql_concat" || kind == "safe:sql_percent")
    return {kind,
            {"    cursor = conn.cursor()",
             "    cursor.execute(\"SELECT * FROM users WHERE name = %s\", (" + arg + ",))"},
            {}};
  if (kind == "safe:sql_format")
    return {kind,
            {"    cursor = conn.cursor()",
             "    cursor.execute(\"DELETE FROM items WHERE owner = %s\", (" + arg + ",))"},
            {}};
  if (kind == "safe:path")
    return {kind, {"    handle = open(os.path.join(base_dir, " + arg + "))"}, {}};
  if (kind == "decoy:sql_concat")
    return {kind, {"    audit = conn.audit()", "    audit.record(" + q + ")"}, {}};
  if (kind == "decoy:sql_percent")
    return {kind,
            {"    audit = conn.audit()",
             "    audit.record(\"SELECT * FROM users WHERE name = '%s'\" % " + arg + ")"},
            {}};
  if (kind == "decoy:sql_format")
    return {kind,
            {"    audit = conn.audit()",
             "    audit.record(\"DELETE FROM items WHERE owner = '{}'\".format(" + arg + "))"},
            {}};
  throw Error("unknown Python pattern " + kind);
}

std::string py_unit(Rng& rng, const std::string& kind, const std::string& fname) {
  const std::string arg = pick(rng, kSrcNames);
  std::vector<std::string> lines = {"def " + fname + "(conn, base_dir, " + arg + "):"};
  const int before = static_cast<int>(rng.below(4)), after = static_cast<int>(rng.below(4));
  for (auto& l : py_fillers(rng, before)) lines.push_back(l);
  for (auto& l : py_core(kind, arg).lines) lines.push_back(l);
  for (auto& l : py_fillers(rng, after)) lines.push_back(l);
  lines.push_back("    return " + arg);
  return join_lines(lines);
}

Core sol_core(const std::string& kind) {
  const std::string ind = "        ";
  const std::string write = ind + "balances[msg.sender] -= amount;";
  const std::vector<std::string> call = {ind + "(bool ok, ) = msg.sender.call{value: amount}(\"\");",
                                         ind + "require(ok);"};
  const std::vector<std::string> send = {ind + "bool sent = payable(msg.sender).send(amount);",
                                         ind + "require(sent);"};
  const std::vector<std::string> fake_call = {
      ind + "(bool ok, ) = msg.sender.forward{value: amount}(\"\");", ind + "require(ok);"};
  const std::vector<std::string> fake_send = {
      ind + "bool sent = payable(msg.sender).notify(amount);", ind + "require(sent);"};
  auto then = [](std::vector<std::string> a, const std::string& b) {
    a.push_back(b);
    return a;
  };
  auto first = [](const std::string& a, std::vector<std::string> b) {
    b.insert(b.begin(), a);
    return b;
  };
  if (kind == "vuln:call") return {kind, then(call, write), {"CWE-841"}};
  if (kind == "vuln:send") return {kind, then(send, write), {"CWE-841"}};
  if (kind == "safe:call") return {kind, first(write, call), {}};
  if (kind == "safe:send") return {kind, first(write, send), {}};
  if (kind == "decoy:call") return {kind, then(fake_call, write), {}};
  if (kind == "decoy:send") return {kind, then(fake_send, write), {}};
  throw Error("unknown Solidity pattern " + kind);
}

std::string sol_unit(Rng& rng, const std::string& kind, const std::string& contract) {
  // The withdraw function comes first so its normalized form does not depend
  // on the optional members that follow it.
  std::vector<std::string> lines = {"// SPDX-License-Identifier: MIT", "pragma solidity ^0.8.0;", "",
                                    "contract " + contract + " {",
                                    "    mapping(address => uint256) public balances;", "",
                                    "    function withdraw(uint256 amount) public {",
                                    "        require(balances[msg.sender] >= amount);"};
  for (auto& l : sol_core(kind).lines) lines.push_back(l);
  const bool has_event = rng.below(2) == 1;
  if (has_event) lines.push_back("        emit Withdrawn(msg.sender, amount);");
  lines.push_back("    }");

  std::vector<std::string> state;
  if (has_event) state.push_back("    event Withdrawn(address indexed who, uint256 amount);");
  const bool has_limit = rng.below(2) == 1;
  if (has_limit) state.push_back("    uint256 public limit = " + num(rng, 10, 999) + ";");
  const bool has_owner = rng.below(2) == 1;
  if (has_owner) state.push_back("    address public owner;");
  const bool has_paused = rng.below(2) == 1;
  if (has_paused) state.push_back("    bool public paused;");
  rng.shuffle(state);

  // None of the helpers makes an external call.
  std::vector<std::vector<std::string>> helpers;
  helpers.push_back({"    function deposit() public payable {",
                     "        balances[msg.sender] += msg.value;", "    }"});
  if (has_limit && rng.below(2) == 1) {
    std::vector<std::string> f = {"    function setLimit(uint256 newLimit) public {"};
    if (has_owner) f.push_back("        require(msg.sender == owner);");
    f.push_back("        limit = newLimit;");
    f.push_back("    }");
    helpers.push_back(f);
  }
  if (has_paused && rng.below(2) == 1) {
    std::vector<std::string> f = {"    function pause() public {"};
    if (has_owner) f.push_back("        require(msg.sender == owner);");
    f.push_back("        paused = true;");
    f.push_back("    }");
    helpers.push_back(f);
  }
  if (rng.below(2) == 1) {
    helpers.push_back({"    function balanceOf(address who) public view returns (uint256) {",
                       "        return balances[who];", "    }"});
  }
  if (rng.below(2) == 1) {
    helpers.push_back({"    function move(address to, uint256 amount) public {",
                       "        require(balances[msg.sender] >= amount);",
                       "        balances[msg.sender] -= amount;", "        balances[to] += amount;",
                       "    }"});
  }
  if (rng.below(2) == 1) {
    helpers.push_back({"    function fee(uint256 amount) public pure returns (uint256) {",
                       "        return amount / " + num(rng, 10, 200) + ";", "    }"});
  }
  rng.shuffle(helpers);

  if (!state.empty()) lines.push_back("");
  for (const auto& l : state) lines.push_back(l);
  for (const auto& f : helpers) {
    lines.push_back("");
    for (const auto& l : f) lines.push_back(l);
  }
  lines.push_back("}");
  return join_lines(lines);
}

const std::vector<std::string> kCPatterns = {"strcpy", "strcat", "gets", "sprintf"};
const std::vector<std::string> kPyPatterns = {"sql_concat", "sql_percent", "sql_format", "path"};
const std::vector<std::string> kPyDecoyable = {"sql_concat", "sql_percent", "sql_format"};
const std::vector<std::string> kSolPatterns = {"call", "send"};

std::string two_digits(int v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", v);
  return buf;
}

std::vector<int> project_sizes(Rng& rng, int n_samples, int n_projects) {
  const int base = n_samples / n_projects;
  std::vector<int> sizes(n_projects, base);
  for (int i = 0; i < n_samples % n_projects; ++i) ++sizes[i];
  // Paired perturbations keep the total fixed while varying project sizes.
  const int spread = std::max(0, std::min(6, base / 3));
  for (int i = 0; i + 1 < n_projects; i += 2) {
    const int d = static_cast<int>(rng.below(static_cast<std::uint64_t>(spread) + 1));
    sizes[i] += d;
    sizes[i + 1] -= d;
  }
  return sizes;
}

}  // namespace

DatasetManifest generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "synthetic"));
  const auto sizes = project_sizes(rng, config.n_samples, config.n_projects);

  DatasetManifest manifest;
  manifest.source_files.push_back("synthetic:seed=" + std::to_string(config.seed));
  for (int p = 0; p < config.n_projects; ++p) {
    const auto family = static_cast<Family>(p % 3);
    const bool cpp = family == Family::c_like && (p / 3) % 2 == 1;
    const Language lang = family == Family::python     ? Language::python
                          : family == Family::solidity ? Language::solidity
                          : cpp                        ? Language::cpp
                                                       : Language::c;
    const std::string prefix = family == Family::python     ? "py"
                               : family == Family::solidity ? "sol"
                               : cpp                        ? "cpp"
                                                            : "c";
    const std::string project = prefix + "-project-" + two_digits(p);

    for (int k = 0; k < sizes[p]; ++k) {
      const std::string suffix = two_digits(k);
      std::string kind;
      const double u = rng.uniform();
      const auto& patterns = family == Family::python     ? kPyPatterns
                             : family == Family::solidity ? kSolPatterns
                                                          : kCPatterns;
      if (u < config.vuln_fraction) {
        kind = "vuln:" + pick(rng, patterns);
      } else if (rng.uniform() < config.decoy_rate) {
        kind = "decoy:" + pick(rng, family == Family::python ? kPyDecoyable : patterns);
      } else {
        kind = "safe:" + pick(rng, patterns);
      }

      CodeSample s;
      s.id = project + "-" + suffix;
      s.language = lang;
      s.project = project;
      s.unit_name = kind;
      s.label = kind.rfind("vuln:", 0) == 0 ? 1 : 0;
      s.origin = "synthetic";
      s.commit = hex64(derive_seed(config.seed, s.id));
      switch (family) {
        case Family::c_like: {
          const std::string fname = "handle_" + suffix;
          s.code = c_unit(rng, kind, cpp, fname);
          s.file_path = "src/" + fname + (cpp ? ".cpp" : ".c");
          s.cwes = c_core(rng, kind, "d", "s", "").cwes;
          break;
        }
        case Family::python: {
          const std::string fname = "lookup_" + suffix;
          s.code = py_unit(rng, kind, fname);
          s.file_path = "app/" + fname + ".py";
          s.cwes = py_core(kind, "x").cwes;
          break;
        }
        case Family::solidity: {
          const std::string contract = "Vault" + suffix;
          s.code = sol_unit(rng, kind, contract);
          s.file_path = "contracts/" + contract + ".sol";
          s.cwes = sol_core(kind).cwes;
          break;
        }
      }
      manifest.samples.push_back(std::move(s));
    }
  }
  return manifest;
}

TriggerCorpus generate_trigger_corpus(int n_samples, int n_projects, std::uint64_t seed) {
  if (n_projects < 3 || n_samples < n_projects) throw Error("trigger corpus is too small");
  Rng rng(derive_seed(seed, "trigger"));
  const std::vector<std::string> verbs = {"fetch", "parse", "merge", "scale", "check", "shift"};
  const std::vector<std::string> vars = {"a", "b", "c", "d", "e", "g"};
  TriggerCorpus out;
  out.manifest.source_files.push_back("trigger:seed=" + std::to_string(seed));
  for (int i = 0; i < n_samples; ++i) {
    const int p = i % n_projects;
    const std::string project = "trigger-project-" + two_digits(p);
    const int label = rng.below(2) == 1 ? 1 : 0;
    const int n_lines = 4 + static_cast<int>(rng.below(4));
    const int trigger_at = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_lines)));

    std::vector<std::string> lines = {"def task_" + std::to_string(i) + "(path, mode):"};
    int trigger_line = 0;
    for (int k = 0; k < n_lines; ++k) {
      if (k == trigger_at) {
        lines.push_back(std::string("    data = ") + (label ? "open" : "len") + "(path)");
        trigger_line = static_cast<int>(lines.size());
      } else {
        lines.push_back("    " + vars[k % vars.size()] + " = " + pick(rng, verbs) + "(mode)");
      }
    }
    lines.push_back("    return mode");

    CodeSample s;
    s.id = project + "-" + std::to_string(i);
    s.language = Language::python;
    s.project = project;
    s.file_path = "tasks/task_" + std::to_string(i) + ".py";
    s.unit_name = label ? "trigger:open" : "trigger:len";
    s.code = join_lines(lines);
    s.label = label;
    s.origin = "trigger";
    s.commit = hex64(derive_seed(seed, s.id));
    out.trigger_line[s.id] = trigger_line;
    out.manifest.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace vdet
