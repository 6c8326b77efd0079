#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "octnet/errors.hpp"

namespace octnet {

// k-class confusion matrix; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int k, std::vector<std::string> class_names = {});

  static ConfusionMatrix from_predictions(const std::vector<int>& truths, const std::vector<int>& preds,
                                          int k, std::vector<std::string> class_names = {});

  void add(int truth, int pred, int64_t count = 1);

  int k() const { return k_; }
  int64_t at(int truth, int pred) const;
  int64_t& at(int truth, int pred);
  int64_t row_sum(int truth) const;
  int64_t col_sum(int pred) const;
  int64_t trace() const;
  int64_t total() const;
  const std::vector<std::string>& class_names() const { return names_; }

  bool operator==(const ConfusionMatrix& other) const { return k_ == other.k_ && counts_ == other.counts_; }

 private:
  void check_index(int i, const char* what) const;

  int k_;
  std::vector<std::string> names_;
  std::vector<int64_t> counts_;  // row-major k*k
};

// One-vs-rest counts and the four ratio metrics for a single class.
struct ClassMetrics {
  int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  double accuracy = 0.0, precision = 0.0, sensitivity = 0.0, f1 = 0.0;
  bool degenerate = false;  // some metric had a zero denominator and was forced to 0
};

ClassMetrics class_metrics(const ConfusionMatrix& cm, int class_index);

enum class AggregateMode { micro, macro };

struct AggregateMetrics {
  double precision = 0.0, sensitivity = 0.0, f1 = 0.0;
  bool degenerate = false;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  AggregateMetrics micro, macro;
  double overall_accuracy = 0.0;
  int64_t total = 0;
};

// Full report: per-class metrics plus both aggregates (micro pools TP/FP/FN
// across classes; macro averages the per-class ratios unweighted).
MetricsReport aggregate_metrics(const ConfusionMatrix& cm);
AggregateMetrics aggregate_metrics(const ConfusionMatrix& cm, AggregateMode mode);

// Expected values to compare a report against. Accuracy compares against the
// overall accuracy; the other three against the micro aggregates.
struct MetricsReference {
  std::optional<double> accuracy, precision, sensitivity, f1;
  double tolerance = 0.005;
};

struct ComparisonLine {
  std::string metric;
  double computed = 0.0, expected = 0.0, delta = 0.0;
  bool pass = false;
};

std::vector<ComparisonLine> compare_metrics(const MetricsReport& report, const MetricsReference& ref);

std::string render_report(const ConfusionMatrix& cm, const std::optional<MetricsReference>& ref = std::nullopt);
nlohmann::json report_to_json(const ConfusionMatrix& cm, const std::optional<MetricsReference>& ref = std::nullopt);

}  // namespace octnet
