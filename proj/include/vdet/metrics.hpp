#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace vdet {

struct Finding;

/// Positive class is "vulnerable" throughout.
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  void add(int predicted, int actual);
  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, fpr = 0;
  // A metric whose denominator is zero is reported as 0 with its flag set.
  bool accuracy_undefined = false, precision_undefined = false, recall_undefined = false,
       f1_undefined = false, fpr_undefined = false;
};

ConfusionMatrix confusion(const std::vector<int>& predicted, const std::vector<int>& actual);

/// Aligns findings with ground-truth labels by sample id.
ConfusionMatrix confusion(const std::vector<Finding>& findings,
                          const std::map<std::string, int>& labels);

/// Throws Error on an empty matrix.
MetricsReport metrics(const ConfusionMatrix& cm);

std::string metrics_to_json(const MetricsReport& report, const ConfusionMatrix& cm);
std::string confusion_to_csv(const ConfusionMatrix& cm);

}  // namespace vdet
