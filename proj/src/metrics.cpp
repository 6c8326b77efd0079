#include "octnet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace octnet {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_delta(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.6f", v);
  return buf;
}

double ratio(int64_t num, int64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int k, std::vector<std::string> class_names)
    : k_(k), names_(std::move(class_names)), counts_(static_cast<size_t>(k) * static_cast<size_t>(k), 0) {
  if (k < 1) throw ParamError("confusion matrix needs at least 1 class, got " + std::to_string(k));
  if (names_.empty()) {
    for (int i = 0; i < k; ++i) names_.push_back("class" + std::to_string(i));
  }
  if (static_cast<int>(names_.size()) != k) {
    throw ParamError("expected " + std::to_string(k) + " class names, got " + std::to_string(names_.size()));
  }
}

ConfusionMatrix ConfusionMatrix::from_predictions(const std::vector<int>& truths, const std::vector<int>& preds,
                                                  int k, std::vector<std::string> class_names) {
  if (truths.size() != preds.size()) {
    throw ParamError("truths/preds length mismatch: " + std::to_string(truths.size()) + " vs " +
                     std::to_string(preds.size()));
  }
  ConfusionMatrix cm(k, std::move(class_names));
  for (size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] < 0 || truths[i] >= k) {
      throw LabelError("true label " + std::to_string(truths[i]) + " out of range [0," + std::to_string(k) +
                       ") at index " + std::to_string(i));
    }
    if (preds[i] < 0 || preds[i] >= k) {
      throw LabelError("predicted label " + std::to_string(preds[i]) + " out of range [0," + std::to_string(k) +
                       ") at index " + std::to_string(i));
    }
    cm.add(truths[i], preds[i]);
  }
  return cm;
}

void ConfusionMatrix::check_index(int i, const char* what) const {
  if (i < 0 || i >= k_) {
    throw ParamError(std::string(what) + " index " + std::to_string(i) + " out of range [0," +
                     std::to_string(k_) + ")");
  }
}

void ConfusionMatrix::add(int truth, int pred, int64_t count) {
  check_index(truth, "true-class");
  check_index(pred, "predicted-class");
  if (count < 0) throw ParamError("negative count " + std::to_string(count));
  counts_[static_cast<size_t>(truth) * k_ + pred] += count;
}

int64_t ConfusionMatrix::at(int truth, int pred) const {
  check_index(truth, "true-class");
  check_index(pred, "predicted-class");
  return counts_[static_cast<size_t>(truth) * k_ + pred];
}

int64_t& ConfusionMatrix::at(int truth, int pred) {
  check_index(truth, "true-class");
  check_index(pred, "predicted-class");
  return counts_[static_cast<size_t>(truth) * k_ + pred];
}

int64_t ConfusionMatrix::row_sum(int truth) const {
  check_index(truth, "true-class");
  int64_t s = 0;
  for (int p = 0; p < k_; ++p) s += counts_[static_cast<size_t>(truth) * k_ + p];
  return s;
}

int64_t ConfusionMatrix::col_sum(int pred) const {
  check_index(pred, "predicted-class");
  int64_t s = 0;
  for (int t = 0; t < k_; ++t) s += counts_[static_cast<size_t>(t) * k_ + pred];
  return s;
}

int64_t ConfusionMatrix::trace() const {
  int64_t s = 0;
  for (int i = 0; i < k_; ++i) s += counts_[static_cast<size_t>(i) * k_ + i];
  return s;
}

int64_t ConfusionMatrix::total() const {
  int64_t s = 0;
  for (int64_t c : counts_) s += c;
  return s;
}

ClassMetrics class_metrics(const ConfusionMatrix& cm, int class_index) {
  if (class_index < 0 || class_index >= cm.k()) {
    throw ParamError("class index " + std::to_string(class_index) + " out of range [0," +
                     std::to_string(cm.k()) + ")");
  }
  ClassMetrics m;
  m.tp = cm.at(class_index, class_index);
  m.fn = cm.row_sum(class_index) - m.tp;
  m.fp = cm.col_sum(class_index) - m.tp;
  m.tn = cm.total() - m.tp - m.fn - m.fp;
  m.accuracy = ratio(m.tp + m.tn, cm.total(), m.degenerate);
  m.precision = ratio(m.tp, m.tp + m.fp, m.degenerate);
  m.sensitivity = ratio(m.tp, m.tp + m.fn, m.degenerate);
  m.f1 = ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn, m.degenerate);
  return m;
}

MetricsReport aggregate_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ContractError("cannot aggregate metrics of an empty confusion matrix");
  MetricsReport rep;
  rep.class_names = cm.class_names();
  rep.total = cm.total();
  rep.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());

  int64_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
  double sum_p = 0.0, sum_s = 0.0, sum_f1 = 0.0;
  for (int c = 0; c < cm.k(); ++c) {
    ClassMetrics m = class_metrics(cm, c);
    pooled_tp += m.tp;
    pooled_fp += m.fp;
    pooled_fn += m.fn;
    sum_p += m.precision;
    sum_s += m.sensitivity;
    sum_f1 += m.f1;
    rep.macro.degenerate = rep.macro.degenerate || m.degenerate;
    rep.per_class.push_back(m);
  }
  rep.micro.precision = ratio(pooled_tp, pooled_tp + pooled_fp, rep.micro.degenerate);
  rep.micro.sensitivity = ratio(pooled_tp, pooled_tp + pooled_fn, rep.micro.degenerate);
  rep.micro.f1 = ratio(2 * pooled_tp, 2 * pooled_tp + pooled_fp + pooled_fn, rep.micro.degenerate);
  rep.macro.precision = sum_p / cm.k();
  rep.macro.sensitivity = sum_s / cm.k();
  rep.macro.f1 = sum_f1 / cm.k();
  return rep;
}

AggregateMetrics aggregate_metrics(const ConfusionMatrix& cm, AggregateMode mode) {
  MetricsReport rep = aggregate_metrics(cm);
  return mode == AggregateMode::micro ? rep.micro : rep.macro;
}

std::vector<ComparisonLine> compare_metrics(const MetricsReport& report, const MetricsReference& ref) {
  std::vector<ComparisonLine> lines;
  auto push = [&](const char* name, std::optional<double> expected, double computed) {
    if (!expected.has_value()) return;
    ComparisonLine line;
    line.metric = name;
    line.computed = computed;
    line.expected = *expected;
    line.delta = computed - *expected;
    line.pass = std::abs(line.delta) <= ref.tolerance;
    lines.push_back(line);
  };
  push("accuracy", ref.accuracy, report.overall_accuracy);
  push("precision", ref.precision, report.micro.precision);
  push("sensitivity", ref.sensitivity, report.micro.sensitivity);
  push("f1", ref.f1, report.micro.f1);
  return lines;
}

std::string render_report(const ConfusionMatrix& cm, const std::optional<MetricsReference>& ref) {
  MetricsReport rep = aggregate_metrics(cm);
  std::ostringstream os;

  size_t name_w = 5;
  for (const auto& n : rep.class_names) name_w = std::max(name_w, n.size());
  size_t cell_w = 6;
  for (int t = 0; t < cm.k(); ++t) {
    for (int p = 0; p < cm.k(); ++p) cell_w = std::max(cell_w, std::to_string(cm.at(t, p)).size());
  }
  for (const auto& n : rep.class_names) cell_w = std::max(cell_w, n.size());

  auto pad = [&](const std::string& s, size_t w) {
    return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
  };

  os << "Confusion matrix (rows = true, cols = predicted), N=" << rep.total << "\n";
  os << pad("", name_w);
  for (int p = 0; p < cm.k(); ++p) os << "  " << pad(rep.class_names[static_cast<size_t>(p)], cell_w);
  os << "\n";
  for (int t = 0; t < cm.k(); ++t) {
    os << pad(rep.class_names[static_cast<size_t>(t)], name_w);
    for (int p = 0; p < cm.k(); ++p) os << "  " << pad(std::to_string(cm.at(t, p)), cell_w);
    os << "\n";
  }

  os << "Per-class metrics:\n";
  os << pad("class", name_w) << "  " << pad("tp", 8) << "  " << pad("fp", 8) << "  " << pad("fn", 8) << "  "
     << pad("tn", 8) << "  " << pad("accuracy", 9) << "  " << pad("precision", 9) << "  "
     << pad("sensitivity", 11) << "  " << pad("f1", 8) << "\n";
  for (int c = 0; c < cm.k(); ++c) {
    const ClassMetrics& m = rep.per_class[static_cast<size_t>(c)];
    os << pad(rep.class_names[static_cast<size_t>(c)], name_w) << "  " << pad(std::to_string(m.tp), 8) << "  "
       << pad(std::to_string(m.fp), 8) << "  " << pad(std::to_string(m.fn), 8) << "  "
       << pad(std::to_string(m.tn), 8) << "  " << pad(fmt(m.accuracy), 9) << "  " << pad(fmt(m.precision), 9)
       << "  " << pad(fmt(m.sensitivity), 11) << "  " << pad(fmt(m.f1), 8)
       << (m.degenerate ? "  (degenerate)" : "") << "\n";
  }

  os << "Overall accuracy: " << fmt(rep.overall_accuracy) << "\n";
  os << "Micro average: precision " << fmt(rep.micro.precision) << "  sensitivity "
     << fmt(rep.micro.sensitivity) << "  f1 " << fmt(rep.micro.f1) << "\n";
  os << "Macro average: precision " << fmt(rep.macro.precision) << "  sensitivity "
     << fmt(rep.macro.sensitivity) << "  f1 " << fmt(rep.macro.f1) << "\n";

  if (ref.has_value()) {
    os << "Reference comparison (tolerance " << fmt(ref->tolerance) << "):\n";
    for (const ComparisonLine& line : compare_metrics(rep, *ref)) {
      os << "  " << pad(line.metric, 11) << "  computed " << fmt(line.computed) << "  expected "
         << fmt(line.expected) << "  delta " << fmt_delta(line.delta) << "  "
         << (line.pass ? "PASS" : "FAIL") << "\n";
    }
  }
  return os.str();
}

nlohmann::json report_to_json(const ConfusionMatrix& cm, const std::optional<MetricsReference>& ref) {
  MetricsReport rep = aggregate_metrics(cm);
  nlohmann::json j;
  j["class_order"] = rep.class_names;
  j["total"] = rep.total;
  auto& rows = j["confusion_matrix"] = nlohmann::json::array();
  for (int t = 0; t < cm.k(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < cm.k(); ++p) row.push_back(cm.at(t, p));
    rows.push_back(std::move(row));
  }
  auto& per_class = j["per_class"] = nlohmann::json::array();
  for (int c = 0; c < cm.k(); ++c) {
    const ClassMetrics& m = rep.per_class[static_cast<size_t>(c)];
    per_class.push_back({{"class", rep.class_names[static_cast<size_t>(c)]},
                         {"tp", m.tp},
                         {"tn", m.tn},
                         {"fp", m.fp},
                         {"fn", m.fn},
                         {"accuracy", m.accuracy},
                         {"precision", m.precision},
                         {"sensitivity", m.sensitivity},
                         {"f1", m.f1},
                         {"degenerate", m.degenerate}});
  }
  j["overall_accuracy"] = rep.overall_accuracy;
  j["micro"] = {{"precision", rep.micro.precision},
                {"sensitivity", rep.micro.sensitivity},
                {"f1", rep.micro.f1}};
  j["macro"] = {{"precision", rep.macro.precision},
                {"sensitivity", rep.macro.sensitivity},
                {"f1", rep.macro.f1}};
  if (ref.has_value()) {
    auto& comp = j["reference_comparison"] = nlohmann::json::array();
    for (const ComparisonLine& line : compare_metrics(rep, *ref)) {
      comp.push_back({{"metric", line.metric},
                      {"computed", line.computed},
                      {"expected", line.expected},
                      {"delta", line.delta},
                      {"pass", line.pass}});
    }
    j["tolerance"] = ref->tolerance;
  }
  return j;
}

}  // namespace octnet
