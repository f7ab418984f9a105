#include <doctest.h>

#include "vdet/synthetic.hpp"
#include "vdet/verify.hpp"

using namespace vdet;

TEST_CASE("synthetic corpus is deterministic and sized") {
  SyntheticConfig c;
  c.n_samples = 120;
  c.n_projects = 9;
  c.seed = 5;
  const auto a = generate_synthetic(c);
  CHECK(a == generate_synthetic(c));
  CHECK(a.samples.size() == 120);
  std::set<std::string> projects, ids;
  std::set<Language> langs;
  std::size_t vuln = 0;
  for (const auto& s : a.samples) {
    projects.insert(s.project);
    ids.insert(s.id);
    langs.insert(s.language);
    vuln += s.label;
    CHECK(s.origin == "synthetic");
  }
  CHECK(projects.size() == 9);
  CHECK(ids.size() == 120);
  CHECK(langs.size() == 4);
  CHECK(vuln > 30);
  CHECK(vuln < 80);
  c.seed = 6;
  CHECK_FALSE(a == generate_synthetic(c));
}

TEST_CASE("planted patterns agree with the heuristic judge") {
  SyntheticConfig c;
  c.n_samples = 300;
  c.decoy_rate = 0.3;
  c.seed = 2;
  std::size_t decoys = 0;
  for (const auto& s : generate_synthetic(c).samples) {
    const bool fires = !heuristic_rule(s.code, s.language).empty();
    INFO(s.unit_name << "\n" << s.code);
    CHECK(fires == (s.label == 1));
    if (s.unit_name.rfind("decoy:", 0) == 0) {
      ++decoys;
      CHECK(s.label == 0);
    }
  }
  CHECK(decoys > 0);
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig c;
  c.n_samples = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SyntheticConfig{};
  c.vuln_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("trigger corpus") {
  const auto t = generate_trigger_corpus(40, 4, 1);
  CHECK(t.manifest.samples.size() == 40);
  for (const auto& s : t.manifest.samples) {
    const int line = t.trigger_line.at(s.id);
    std::size_t pos = 0;
    for (int i = 1; i < line; ++i) pos = s.code.find('\n', pos) + 1;
    const auto text = s.code.substr(pos, s.code.find('\n', pos) - pos);
    CHECK(text.find(s.label ? "open(" : "len(") != std::string::npos);
  }
}
