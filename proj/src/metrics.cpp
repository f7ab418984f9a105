#include "vdet/metrics.hpp"

#include <json.hpp>

#include "vdet/common.hpp"
#include "vdet/inference.hpp"

namespace vdet {

using nlohmann::json;

void ConfusionMatrix::add(int predicted, int actual) {
  if (predicted == 1) (actual == 1 ? tp : fp) += 1;
  else (actual == 1 ? fn : tn) += 1;
}

ConfusionMatrix confusion(const std::vector<int>& predicted, const std::vector<int>& actual) {
  if (predicted.size() != actual.size())
    throw Error("prediction and label lists differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) cm.add(predicted[i], actual[i]);
  return cm;
}

ConfusionMatrix confusion(const std::vector<Finding>& findings,
                          const std::map<std::string, int>& labels) {
  ConfusionMatrix cm;
  for (const auto& f : findings) {
    auto it = labels.find(f.id);
    if (it == labels.end()) throw Error("finding '" + f.id + "' has no ground-truth label");
    cm.add(f.label, it->second);
  }
  if (cm.total() != labels.size())
    throw Error("findings and labels are not aligned: " + std::to_string(cm.total()) +
                " findings for " + std::to_string(labels.size()) + " labels");
  return cm;
}

namespace {
double ratio(std::size_t num, std::size_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("cannot compute metrics on an empty confusion matrix");
  MetricsReport r;
  r.accuracy = ratio(cm.tp + cm.tn, cm.total(), r.accuracy_undefined);
  r.precision = ratio(cm.tp, cm.tp + cm.fp, r.precision_undefined);
  r.recall = ratio(cm.tp, cm.tp + cm.fn, r.recall_undefined);
  r.fpr = ratio(cm.fp, cm.fp + cm.tn, r.fpr_undefined);
  const double pr = r.precision + r.recall;
  r.f1_undefined = r.precision_undefined || r.recall_undefined || pr == 0.0;
  r.f1 = r.f1_undefined ? 0.0 : 2.0 * r.precision * r.recall / pr;
  return r;
}

std::string metrics_to_json(const MetricsReport& r, const ConfusionMatrix& cm) {
  json undefined = json::array();
  if (r.accuracy_undefined) undefined.push_back("accuracy");
  if (r.precision_undefined) undefined.push_back("precision");
  if (r.recall_undefined) undefined.push_back("recall");
  if (r.f1_undefined) undefined.push_back("f1");
  if (r.fpr_undefined) undefined.push_back("fpr");
  json obj = {{"accuracy", r.accuracy},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"fpr", r.fpr},
              {"undefined", undefined},
              {"confusion_matrix", {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}}},
              {"total", cm.total()}};
  return obj.dump(2) + "\n";
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
  std::string out = "actual\\predicted,safe,vulnerable\n";
  out += "safe," + std::to_string(cm.tn) + "," + std::to_string(cm.fp) + "\n";
  out += "vulnerable," + std::to_string(cm.fn) + "," + std::to_string(cm.tp) + "\n";
  return out;
}

}  // namespace vdet
