#pragma once

#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "dominet/label.hpp"

namespace dominet {

/// Counts are reals so that run-averaged tables fit the same type.
struct ConfusionTable {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double tn = 0.0;

  double total() const { return tp + fp + fn + tn; }
};

/// A metric is nullopt when its denominator is zero.
struct MetricSet {
  std::optional<double> ppv;
  std::optional<double> npv;
  std::optional<double> tpr;
  std::optional<double> tnr;
  std::optional<double> balanced_accuracy;
  std::optional<double> error_rate;
};

MetricSet confusion_metrics(const ConfusionTable& ct);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  double auc = 0.0;
  /// From (0, 0) at threshold +inf to (1, 1) at the lowest score.
  std::vector<RocPoint> curve;
};

/// AUC = P(s+ > s-) + 0.5 P(s+ = s-), computed from midranks.
RocResult roc_auc(std::span<const double> scores, std::span<const Label> labels);

/// Predicts Dominant iff score >= threshold.
ConfusionTable confusion_at(std::span<const double> scores,
                            std::span<const Label> labels, double threshold);

struct CutoffResult {
  double threshold = 0.0;
  double youden_j = 0.0;
  ConfusionTable confusion;
  MetricSet metrics;
};

/// Threshold among the distinct scores maximizing Youden's J = TPR - FPR;
/// ties go to the lower threshold.
CutoffResult optimal_cutoff(std::span<const double> scores,
                            std::span<const Label> labels);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;

  double ci_low() const { return mean - 1.96 * se; }
  double ci_high() const { return mean + 1.96 * se; }
};

/// Mean and standard error sd / sqrt(n) (sample sd; se = 0 when n = 1).
MeanSe mean_se(std::span<const double> values);

nlohmann::json metrics_to_json(const MetricSet& m);
nlohmann::json confusion_to_json(const ConfusionTable& ct);
nlohmann::json mean_se_to_json(const MeanSe& s);
std::string roc_to_csv(const RocResult& roc);

}  // namespace dominet
