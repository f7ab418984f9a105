#include <doctest.h>

#include "vdet/inference.hpp"
#include "vdet/rng.hpp"

using namespace vdet;

TEST_CASE("fusion rules") {
  EnsembleSpec uniform;
  CHECK(fuse({0.8, 0.8}, uniform) == doctest::Approx(0.8));
  CHECK(fuse({0.6, 1.0}, uniform) == doctest::Approx(0.8));
  EnsembleSpec weighted;
  weighted.fusion = Fusion::f1_weighted;
  weighted.member_f1 = {0.5, 1.0};
  CHECK(fuse({0.6, 1.0}, weighted) == doctest::Approx((0.5 * 0.6 + 1.0) / 1.5));
  CHECK(fuse({0.37}, uniform) == 0.37);
  EnsembleSpec missing;
  missing.fusion = Fusion::f1_weighted;
  CHECK_THROWS_AS(fuse({0.1, 0.2}, missing), Error);
  EnsembleSpec two;
  two.members = {"a", "b"};
  CHECK_THROWS_AS(fuse({0.1}, two), Error);
}

TEST_CASE("fused probability stays within member bounds") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng.below(4);
    std::vector<double> ps;
    EnsembleSpec spec;
    spec.fusion = i % 2 ? Fusion::f1_weighted : Fusion::uniform_mean;
    for (std::size_t k = 0; k < n; ++k) {
      ps.push_back(rng.uniform());
      spec.member_f1.push_back(0.05 + rng.uniform());
    }
    const double f = fuse(ps, spec);
    CHECK(f >= *std::min_element(ps.begin(), ps.end()));
    CHECK(f <= *std::max_element(ps.begin(), ps.end()));
  }
}

TEST_CASE("threshold tuning") {
  std::vector<std::pair<double, int>> separated;
  for (int i = 0; i < 5; ++i) {
    separated.emplace_back(0.9, 1);
    separated.emplace_back(0.1, 0);
  }
  // Candidates {0.1, 0.5, 0.9}; 0.5 is the smallest with F1 = 1.
  CHECK(tune_threshold(separated) == 0.5);

  std::vector<std::pair<double, int>> equal = {{0.3, 1}, {0.3, 0}, {0.3, 1}};
  CHECK(tune_threshold(equal) == 0.3);

  std::vector<std::pair<double, int>> skewed = {{0.95, 1}, {0.8, 1}, {0.7, 0}, {0.2, 0}};
  CHECK(tune_threshold(skewed) == 0.8);
  CHECK_THROWS_AS(tune_threshold({{0.2, 1}, {0.4, 1}}), Error);
}

TEST_CASE("finding label follows the threshold") {
  CHECK(make_finding("a", 0.5, 0.5).label == 1);
  CHECK(make_finding("a", 0.4999, 0.5).label == 0);
  CHECK(make_finding("a", 0.99, 1.0).label == 0);
}

TEST_CASE("finding JSON omits optional keys") {
  auto f = make_finding("x", 0.7, 0.5);
  auto j = finding_to_json(f);
  CHECK_FALSE(j.contains("members"));
  CHECK_FALSE(j.contains("explanation"));
  CHECK_FALSE(j.contains("verdict"));
  CHECK(j.dump().find("null") == std::string::npos);

  f.members = {0.6, 0.8};
  Explanation ex;
  ex.top_k = {{3, 0.5}, {1, 0.25}};
  f.explanation = ex;
  Verdict v;
  v.decision = Decision::overturned;
  v.rationale = "r";
  v.confidence = 0.6;
  f.verdict = v;
  j = finding_to_json(f);
  CHECK(j.at("members").size() == 2);
  const auto back = finding_from_json(j);
  CHECK(back.members == f.members);
  CHECK(back.explanation->top_k == ex.top_k);
  CHECK(back.verdict->decision == Decision::overturned);
  CHECK(findings_to_jsonl({f, f}).find('\n') != std::string::npos);
}
