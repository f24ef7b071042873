#include "pjfit/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "pjfit/errors.hpp"
#include "pjfit/tensor.hpp"

namespace pjfit {

std::optional<double> compute_auc(std::span<const double> scores, std::span<const int> labels) {
  require_size(labels.size(), scores.size(), "compute_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the positive rank sum stays integral with averaged tie ranks.
  unsigned long long rank2_pos = 0, n_pos = 0;
  for (std::size_t a = 0; a < n;) {
    std::size_t b = a;
    while (b < n && scores[order[b]] == scores[order[a]]) ++b;
    for (std::size_t k = a; k < b; ++k) {
      if (labels[order[k]] == 1) {
        rank2_pos += a + 1 + b;
        ++n_pos;
      }
    }
    a = b;
  }
  const unsigned long long n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const unsigned long long u2 = rank2_pos - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / static_cast<double>(2 * n_pos * n_neg);
}

double Confusion::precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
double Confusion::recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
double Confusion::f1() const {
  return tp == 0 ? 0.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
}
double Confusion::accuracy() const {
  return total() == 0 ? 0.0 : double(tp + tn) / double(total());
}

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold) {
  require_size(labels.size(), scores.size(), "confusion_at");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    if (labels[i] == 1)
      (predicted ? c.tp : c.fn)++;
    else
      (predicted ? c.fp : c.tn)++;
  }
  return c;
}

Thresholds tune_thresholds(std::span<const double> scores, std::span<const int> labels) {
  require_size(labels.size(), scores.size(), "tune_thresholds");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty())
    throw DataError("tune_thresholds: validation scores need both classes");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  std::vector<double> distinct(scores.begin(), scores.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> candidates{0.0};
  for (std::size_t k = 1; k < distinct.size(); ++k)
    candidates.push_back(0.5 * (distinct[k - 1] + distinct[k]));
  candidates.push_back(1.0);

  auto above = [](const std::vector<double>& v, double t) {
    return static_cast<std::size_t>(v.end() - std::upper_bound(v.begin(), v.end(), t));
  };
  Thresholds out;
  double best_f1 = -1.0;
  bool have_recall = false;
  for (double t : candidates) {
    Confusion c;
    c.tp = above(pos, t);
    c.fn = pos.size() - c.tp;
    c.fp = above(neg, t);
    c.tn = neg.size() - c.fp;
    if (c.f1() >= best_f1) {
      best_f1 = c.f1();
      out.f1 = t;
    }
    if (c.recall() >= kTargetRecall) {
      out.recall = t;
      have_recall = true;
    }
  }
  // Threshold 0 predicts every positive, so recall 1 is always reachable.
  if (!have_recall) out.recall = 0.0;
  return out;
}

MetricsReport build_report(std::span<const double> val_scores, std::span<const int> val_labels,
                           std::span<const double> test_scores, std::span<const int> test_labels) {
  MetricsReport r;
  r.thresholds = tune_thresholds(val_scores, val_labels);
  const auto auc = compute_auc(test_scores, test_labels);
  if (!auc) throw DataError("evaluation: test split has a single class, AUC is undefined");
  r.auc = *auc;
  r.confusion = confusion_at(test_scores, test_labels, r.thresholds.f1);
  r.accuracy = r.confusion.accuracy();
  r.f1 = r.confusion.f1();
  const Confusion at_r = confusion_at(test_scores, test_labels, r.thresholds.recall);
  r.precision_at_recall = at_r.precision();
  r.recall_at_recall_threshold = at_r.recall();
  r.test_size = test_scores.size();
  r.positives = r.confusion.tp + r.confusion.fn;
  return r;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  return {
      {"mode", r.mode},
      {"auc", r.auc},
      {"accuracy", r.accuracy},
      {"f1", r.f1},
      {"precision_at_recall_0.8", r.precision_at_recall},
      {"recall_at_recall_threshold", r.recall_at_recall_threshold},
      {"thresholds", {{"f1", r.thresholds.f1}, {"recall_0.8", r.thresholds.recall}}},
      {"counts",
       {{"test", r.test_size},
        {"positives", r.positives},
        {"tp", r.confusion.tp},
        {"fp", r.confusion.fp},
        {"tn", r.confusion.tn},
        {"fn", r.confusion.fn}}},
      {"config_hash", r.config_hash},
  };
}

}  // namespace pjfit
