#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace pjfit {

// Probability that a random positive outranks a random negative, ties
// counted one half. nullopt when only one class is present.
std::optional<double> compute_auc(std::span<const double> scores, std::span<const int> labels);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double precision() const;  // 0 when nothing is predicted positive
  double recall() const;
  double f1() const;
  double accuracy() const;
};

// A record is predicted positive when its score is strictly above `threshold`.
Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold);

struct Thresholds {
  double f1 = 0.5;      // max-F1 operating point
  double recall = 0.5;  // largest threshold keeping recall >= 0.8
};

inline constexpr double kTargetRecall = 0.8;

// Candidates are 0, 1 and the midpoints between consecutive distinct
// scores; ties go to the larger threshold. Throws DataError unless both
// classes are present.
Thresholds tune_thresholds(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
  std::string mode;
  double auc = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision_at_recall = 0.0;
  double recall_at_recall_threshold = 0.0;
  Thresholds thresholds;
  std::size_t test_size = 0;
  std::size_t positives = 0;
  Confusion confusion;  // at the F1 threshold
  std::string config_hash;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline bool operator==(const Thresholds& a, const Thresholds& b) {
  return a.f1 == b.f1 && a.recall == b.recall;
}
inline bool operator==(const Confusion& a, const Confusion& b) {
  return a.tp == b.tp && a.fp == b.fp && a.tn == b.tn && a.fn == b.fn;
}

// Thresholds come from validation; every metric is measured on test.
MetricsReport build_report(std::span<const double> val_scores, std::span<const int> val_labels,
                           std::span<const double> test_scores, std::span<const int> test_labels);

nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace pjfit
