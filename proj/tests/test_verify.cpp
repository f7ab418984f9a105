#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "vdet/verify.hpp"

using namespace vdet;

namespace {

CodeSample sample(std::string id, Language lang, std::string code) {
  CodeSample s;
  s.id = std::move(id);
  s.language = lang;
  s.project = "p";
  s.code = std::move(code);
  return s;
}

const char* kGets = "void f(void) {\n  char buf[8];\n  gets(buf);\n}\n";
const char* kSafe = "int add(int a, int b) {\n  return a + b;\n}\n";

// Serves canned replies on a free local port for the lifetime of the object.
struct JudgeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  std::string last_auth;
  std::string last_body;

  explicit JudgeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server.Post("/judge", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      handler(req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~JudgeServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/judge"; }
};

JudgeConfig remote_config(const std::string& url) {
  JudgeConfig c;
  c.mode = JudgeKind::remote;
  c.endpoint = url;
  c.token = "secret";
  c.timeout_seconds = 5;
  c.retries = 1;
  return c;
}

}  // namespace

TEST_CASE("heuristic rules") {
  CHECK_FALSE(heuristic_rule(kGets, Language::c).empty());
  CHECK(heuristic_rule(kSafe, Language::c).empty());
  CHECK(heuristic_rule("void f(char* d, const char* s) { obj.strcpy(d, s); }", Language::c).empty());
  CHECK_FALSE(heuristic_rule("void f(char* d, const char* s) { strcpy(d, s); }", Language::cpp).empty());
  CHECK_FALSE(heuristic_rule("def q(c, n):\n    c.execute(\"SELECT \" + n)\n", Language::python).empty());
  CHECK_FALSE(heuristic_rule("def q(c, n):\n    c.execute(f\"SELECT {n}\")\n", Language::python).empty());
  CHECK(heuristic_rule("def q(c, n):\n    c.execute(\"SELECT ?\", (n,))\n", Language::python).empty());
  const char* reentrant =
      "contract A {\n mapping(address => uint) balances;\n function w(uint amount) public {\n"
      "  (bool ok, ) = msg.sender.call{value: amount}(\"\");\n  balances[msg.sender] -= amount;\n }\n}\n";
  const char* ordered =
      "contract A {\n mapping(address => uint) balances;\n function w(uint amount) public {\n"
      "  balances[msg.sender] -= amount;\n  (bool ok, ) = msg.sender.call{value: amount}(\"\");\n }\n}\n";
  CHECK_FALSE(heuristic_rule(reentrant, Language::solidity).empty());
  CHECK(heuristic_rule(ordered, Language::solidity).empty());
}

TEST_CASE("heuristic verdicts") {
  auto v = judge_heuristic(make_finding("a", 0.7, 0.5), kGets, Language::c);
  CHECK(v.decision == Decision::confirmed);
  CHECK(v.confidence == 0.9);
  v = judge_heuristic(make_finding("a", 0.6, 0.5), kSafe, Language::c);
  CHECK(v.decision == Decision::overturned);
  CHECK(v.confidence == 0.6);
  v = judge_heuristic(make_finding("a", 0.95, 0.5), kSafe, Language::c);
  CHECK(v.decision == Decision::uncertain);
  CHECK(v.confidence == 0.5);
  v = judge_heuristic(make_finding("a", 0.6, 0.5), "char* s = \"open", Language::c);
  CHECK(v.decision == Decision::uncertain);
  CHECK_FALSE(v.rationale.empty());
}

TEST_CASE("apply_verification counts") {
  std::vector<CodeSample> store;
  std::vector<Finding> findings;
  for (int i = 0; i < 7; ++i) store.push_back(sample("c" + std::to_string(i), Language::c, kGets));
  for (int i = 0; i < 2; ++i) store.push_back(sample("o" + std::to_string(i), Language::c, kSafe));
  store.push_back(sample("u0", Language::c, kSafe));
  store.push_back(sample("n0", Language::c, kSafe));
  std::map<std::string, const CodeSample*> by_id;
  for (const auto& s : store) by_id[s.id] = &s;
  for (const auto& s : store) {
    const double p = s.id[0] == 'u' ? 0.97 : s.id[0] == 'n' ? 0.2 : 0.7;
    findings.push_back(make_finding(s.id, p, 0.5));
  }
  const auto r = apply_verification(findings, by_id, JudgeConfig{});
  CHECK(r.report.judged == 10);
  CHECK(r.report.confirmed == 7);
  CHECK(r.report.overturned == 2);
  CHECK(r.report.uncertain == 1);
  CHECK(r.report.positives_before == 10);
  CHECK(r.report.positives_after == 8);
  CHECK(r.report.verification_rate == doctest::Approx(0.7));
  CHECK(r.findings.size() == findings.size());
  CHECK(r.findings.back().label == 0);
  CHECK_FALSE(r.findings.back().verdict.has_value());
  CHECK(r.findings[7].label == 0);
  CHECK(r.findings[7].p_vuln == findings[7].p_vuln);
  const auto j = nlohmann::json::parse(verification_to_json(r));
  CHECK(j.at("counts").at("confirmed") == 7);
  CHECK(j.at("verdicts").size() == 10);
}

TEST_CASE("apply_verification edge cases") {
  const auto empty = apply_verification({}, {}, JudgeConfig{});
  CHECK(empty.report.rate_undefined);
  CHECK(empty.report.verification_rate == 0.0);
  const auto missing = apply_verification({make_finding("ghost", 0.8, 0.5)}, {}, JudgeConfig{});
  CHECK(missing.findings[0].verdict->decision == Decision::uncertain);
  JudgeConfig bad;
  bad.retries = -1;
  CHECK_THROWS_AS(apply_verification({}, {}, bad), Error);
}

TEST_CASE("remote judge") {
  auto f = make_finding("r1", 0.8, 0.5);
  const JudgeRequest req{&f, kSafe, Language::c, {"CWE-120"}};

  SUBCASE("overturned verdict is honoured") {
    JudgeServer srv([](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"verdict":"overturned","rationale":"bounded","confidence":0.8})",
                      "application/json");
    });
    const auto v = judge_remote(req, remote_config(srv.url()));
    CHECK(v.decision == Decision::overturned);
    CHECK(v.judge == JudgeKind::remote);
    CHECK(v.rationale == "bounded");
    CHECK(v.confidence == doctest::Approx(0.8));
    CHECK(srv.last_auth == "Bearer secret");
    const auto body = nlohmann::json::parse(srv.last_body);
    CHECK(body.at("id") == "r1");
    CHECK(body.at("cwe_hints").at(0) == "CWE-120");
  }
  SUBCASE("unknown verdict is uncertain") {
    JudgeServer srv([](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"verdict":"maybe"})", "application/json");
    });
    const auto v = judge_remote(req, remote_config(srv.url()));
    CHECK(v.decision == Decision::uncertain);
    CHECK(v.rationale.find("remote judge failed") == 0);
  }
  SUBCASE("server errors are retried, client errors are not") {
    JudgeServer srv([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    CHECK(judge_remote(req, remote_config(srv.url())).decision == Decision::uncertain);
    CHECK(srv.hits == 2);
    JudgeServer four([](const httplib::Request&, httplib::Response& res) { res.status = 403; });
    CHECK(judge_remote(req, remote_config(four.url())).decision == Decision::uncertain);
    CHECK(four.hits == 1);
  }
  SUBCASE("unreachable endpoint is uncertain") {
    int port = 0;
    {
      JudgeServer srv([](const httplib::Request&, httplib::Response&) {});
      port = srv.port;
    }
    auto cfg = remote_config("http://127.0.0.1:" + std::to_string(port) + "/judge");
    cfg.retries = 0;
    const auto v = judge_remote(req, cfg);
    CHECK(v.decision == Decision::uncertain);
    CHECK(v.rationale.find("remote judge failed") == 0);
  }
  SUBCASE("apply_verification flips labels from remote verdicts") {
    JudgeServer srv([](const httplib::Request& r, httplib::Response& res) {
      const auto id = nlohmann::json::parse(r.body).at("id").get<std::string>();
      res.set_content(id[0] == 'a' ? R"({"verdict":"confirmed"})" : R"({"verdict":"overturned"})",
                      "application/json");
    });
    std::vector<CodeSample> store;
    std::vector<Finding> findings;
    for (int i = 0; i < 9; ++i) {
      const std::string id = (i % 3 ? "a" : "b") + std::to_string(i);
      store.push_back(sample(id, Language::c, kSafe));
      findings.push_back(make_finding(id, 0.9, 0.5));
    }
    std::map<std::string, const CodeSample*> by_id;
    for (const auto& s : store) by_id[s.id] = &s;
    const auto r = apply_verification(findings, by_id, remote_config(srv.url()));
    CHECK(r.report.confirmed == 6);
    CHECK(r.report.overturned == 3);
    for (std::size_t i = 0; i < findings.size(); ++i)
      CHECK(r.findings[i].label == (i % 3 ? 1 : 0));
  }
}
