#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace asymdiff {

struct ScoredExample {
  std::uint32_t user_id = 0;
  int label = 0;
  double score = 0.0;
};

// Mann-Whitney statistic with midranks: P(s+ > s-) + P(s+ == s-) / 2.
// Throws UndefinedMetricError without both classes.
double auc(std::span<const ScoredExample> examples);

struct UaucResult {
  double value = 0.0;
  std::size_t users_scored = 0;
  std::size_t users_skipped = 0;  // users with a single class
};

// Per-user AUC averaged with weights equal to each scored user's example count.
UaucResult uauc_detail(std::span<const ScoredExample> examples);
double uauc(std::span<const ScoredExample> examples);

// Mean cross-entropy, scores clamped to [1e-7, 1 - 1e-7].
double logloss(std::span<const ScoredExample> examples);

// (model / base - 1) * 100. Throws ConfigError when base <= 0.
double relaimpr(double metric_model, double metric_base);

struct RelaImprEntry {
  std::string baseline;
  std::string metric;  // "auc" or "uauc"
  double percent = 0.0;
};

struct MetricsReport {
  std::string arm;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string serving_path;
  double eval_missing_rate = 0.0;
  double auc = 0.0;
  double uauc = 0.0;
  double logloss = 0.0;
  std::size_t n_examples = 0;
  std::size_t n_users_scored = 0;
  std::size_t n_users_skipped = 0;
  std::vector<RelaImprEntry> relaimpr;
};

MetricsReport compute_report(std::span<const ScoredExample> examples);

// Adds auc and uauc RelaImpr entries against `base`.
void add_relaimpr(MetricsReport& report, const MetricsReport& base, const std::string& baseline_name);

// Canonical structured text: fixed key order, fixed float formatting.
nlohmann::ordered_json to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

// One CSV row (and the matching header) for sweep aggregation.
std::string report_csv_header();
std::string report_csv_row(const MetricsReport& r);

// Fixed-precision rendering used everywhere a metric is written as text.
std::string format_metric(double v);

}  // namespace asymdiff
