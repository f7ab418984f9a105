#include <doctest.h>

#include "vdet/inference.hpp"
#include "vdet/metrics.hpp"
#include "vdet/rng.hpp"

using namespace vdet;

TEST_CASE("hand-counted confusion matrix") {
  const auto cm = confusion(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 0, 1});
  CHECK(cm == ConfusionMatrix{1, 1, 1, 1});
  const auto all_missed = confusion(std::vector<int>{0, 0, 0}, std::vector<int>{1, 1, 1});
  CHECK(all_missed.tp == 0);
  CHECK(all_missed.fn == 3);
  const auto perfect = confusion(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1});
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);
  CHECK_THROWS_AS(confusion(std::vector<int>{1}, std::vector<int>{1, 0}), Error);
}

TEST_CASE("worked example") {
  ConfusionMatrix cm{90, 5, 95, 10};
  const auto r = metrics(cm);
  CHECK(r.accuracy == doctest::Approx(0.925).epsilon(1e-12));
  CHECK(r.precision == doctest::Approx(90.0 / 95.0).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(r.f1 == doctest::Approx(180.0 / 195.0).epsilon(1e-12));
  CHECK(r.fpr == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("perfect predictions and zero denominators") {
  const auto r = metrics(ConfusionMatrix{3, 0, 4, 0});
  CHECK(r.accuracy == 1.0);
  CHECK(r.fpr == 0.0);
  const auto none = metrics(ConfusionMatrix{0, 0, 5, 0});
  CHECK(none.precision == 0.0);
  CHECK(none.precision_undefined);
  CHECK(none.recall_undefined);
  CHECK(none.f1_undefined);
  CHECK_FALSE(none.fpr_undefined);
  CHECK_THROWS_AS(metrics(ConfusionMatrix{}), Error);
}

TEST_CASE("metrics agree with a raw recount") {
  Rng rng(17);
  for (int t = 0; t < 20; ++t) {
    std::vector<int> pred, act;
    const int n = 1 + static_cast<int>(rng.below(200));
    for (int i = 0; i < n; ++i) {
      pred.push_back(static_cast<int>(rng.below(2)));
      act.push_back(static_cast<int>(rng.below(2)));
    }
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      if (pred[i] && act[i]) ++tp;
      else if (pred[i]) ++fp;
      else if (act[i]) ++fn;
      else ++tn;
    }
    const auto r = metrics(confusion(pred, act));
    CHECK(std::abs(r.accuracy - (tp + tn) / n) <= 1e-12);
    if (tp + fp > 0) CHECK(std::abs(r.precision - tp / (tp + fp)) <= 1e-12);
    if (tp + fn > 0) CHECK(std::abs(r.recall - tp / (tp + fn)) <= 1e-12);
    if (fp + tn > 0) CHECK(std::abs(r.fpr - fp / (fp + tn)) <= 1e-12);
    if (tp > 0) CHECK(std::abs(r.f1 - 2 * r.precision * r.recall / (r.precision + r.recall)) <= 1e-12);
    for (double v : {r.accuracy, r.precision, r.recall, r.f1, r.fpr}) CHECK((v >= 0 && v <= 1));
  }
}

TEST_CASE("confusion over findings aligns by id") {
  std::vector<Finding> findings = {make_finding("a", 0.9, 0.5), make_finding("b", 0.1, 0.5)};
  const auto cm = confusion(findings, {{"a", 0}, {"b", 0}});
  CHECK(cm.fp == 1);
  CHECK(cm.tn == 1);
  CHECK_THROWS_AS(confusion(findings, {{"a", 0}}), Error);
}

TEST_CASE("report serializations") {
  ConfusionMatrix cm{1, 2, 3, 4};
  const auto j = nlohmann::json::parse(metrics_to_json(metrics(cm), cm));
  CHECK(j.at("confusion_matrix").at("fn") == 4);
  CHECK(j.contains("fpr"));
  const auto csv = confusion_to_csv(cm);
  CHECK(csv.find("actual\\predicted,safe,vulnerable") != std::string::npos);
}
