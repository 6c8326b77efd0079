#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "octnet/metrics.hpp"

namespace octnet {

enum class Phase { training, testing };
const char* phase_name(Phase p);

// One bundled result: a model's confusion matrix for one phase plus the
// summary metrics published alongside it.
struct ReferenceEntry {
  std::string model;
  Phase phase = Phase::training;
  ConfusionMatrix matrix{1};
  MetricsReference metrics;
};

struct ReferenceTables {
  std::vector<std::string> class_order;
  std::vector<ReferenceEntry> entries;
  std::vector<int64_t> train_counts, test_counts;
  std::vector<double> train_percent, test_percent;

  const ReferenceEntry& find(const std::string& model, Phase phase) const;
};

// Raw JSON the binary ships with (kept in sync with data/reference_tables.json).
const char* embedded_reference_json();

ReferenceTables load_reference_tables();                         // embedded fixture
ReferenceTables load_reference_tables_file(const std::string& path);  // external override
ReferenceTables parse_reference_tables(const nlohmann::json& j);

// One line of the reproduction check. Testing entries are PASS/FAIL at the
// tolerance; training entries are NOTE lines (documented mismatches, never
// failures).
struct ReproLine {
  std::string status;  // "PASS" | "FAIL" | "NOTE"
  std::string model;
  Phase phase = Phase::training;
  double computed = 0.0, expected = 0.0, delta = 0.0;
  AggregateMetrics micro, macro;
};

struct ReproductionReport {
  std::vector<ReproLine> lines;  // testing lines first, then training notes
  double tolerance = 0.005;
  bool ok = false;  // every testing line passed

  std::string to_text() const;
  nlohmann::json to_json() const;
};

ReproductionReport reproduce_reference_metrics(const ReferenceTables& tables, double tolerance = 0.005);

}  // namespace octnet
