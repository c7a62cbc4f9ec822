#include "dominet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dominet/csv.hpp"
#include "dominet/error.hpp"

namespace dominet {
namespace {

std::optional<double> ratio(double num, double den) {
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

void check_scores(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::Dimension, "scores and labels disagree in length");
  }
  std::size_t pos = 0;
  for (auto l : labels) pos += l == Label::Dominant ? 1 : 0;
  if (pos == 0 || pos == labels.size()) {
    throw Error(ErrorCode::Class, "ROC analysis needs both classes present");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw Error(ErrorCode::NumericInput, "NaN score");
  }
}

// Indices sorted by descending score.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

MetricSet confusion_metrics(const ConfusionTable& ct) {
  if (!(ct.tp >= 0.0 && ct.fp >= 0.0 && ct.fn >= 0.0 && ct.tn >= 0.0) ||
      !(ct.total() > 0.0)) {
    throw Error(ErrorCode::Validation,
                "confusion counts must be non-negative with a positive total");
  }
  MetricSet m;
  m.ppv = ratio(ct.tp, ct.tp + ct.fp);
  m.npv = ratio(ct.tn, ct.tn + ct.fn);
  m.tpr = ratio(ct.tp, ct.tp + ct.fn);
  m.tnr = ratio(ct.tn, ct.tn + ct.fp);
  if (m.tpr && m.tnr) m.balanced_accuracy = (*m.tpr + *m.tnr) / 2.0;
  m.error_rate = (ct.fp + ct.fn) / ct.total();
  return m;
}

RocResult roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  check_scores(scores, labels);
  const auto order = descending_order(scores);
  double n_pos = 0.0, n_neg = 0.0;
  for (auto l : labels) (l == Label::Dominant ? n_pos : n_neg) += 1.0;

  RocResult out;
  out.curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  // Ascending midrank of a tie block spanning descending positions [i, j)
  // is (M - j + 1 + M - i) / 2; only positives' ranks are summed.
  const auto m = static_cast<double>(scores.size());
  double rank_sum_pos = 0.0;
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double block_pos = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == Label::Dominant) block_pos += 1.0;
      ++j;
    }
    const double block = static_cast<double>(j - i);
    const double midrank = (2.0 * m - static_cast<double>(i) - static_cast<double>(j) + 1.0) / 2.0;
    rank_sum_pos += block_pos * midrank;
    tp += block_pos;
    fp += block - block_pos;
    out.curve.push_back({scores[order[i]], fp / n_neg, tp / n_pos});
    i = j;
  }
  out.auc = (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
  return out;
}

ConfusionTable confusion_at(std::span<const double> scores,
                            std::span<const Label> labels, double threshold) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::Dimension, "scores and labels disagree in length");
  }
  ConfusionTable ct;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == Label::Dominant;
    if (predicted && actual) ct.tp += 1.0;
    else if (predicted) ct.fp += 1.0;
    else if (actual) ct.fn += 1.0;
    else ct.tn += 1.0;
  }
  return ct;
}

CutoffResult optimal_cutoff(std::span<const double> scores,
                            std::span<const Label> labels) {
  check_scores(scores, labels);
  const auto order = descending_order(scores);
  long long n_pos = 0, n_neg = 0;
  for (auto l : labels) (l == Label::Dominant ? n_pos : n_neg) += 1;

  // J = tp/P - fp/N compared exactly as tp*N - fp*P.
  long long tp = 0, fp = 0;
  long long best_num = std::numeric_limits<long long>::min();
  double best_threshold = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == Label::Dominant ? tp : fp) += 1;
      ++i;
    }
    const long long num = tp * n_neg - fp * n_pos;
    if (num >= best_num) {  // later thresholds are lower: >= keeps the lowest
      best_num = num;
      best_threshold = s;
    }
  }
  CutoffResult out;
  out.threshold = best_threshold;
  out.youden_j = static_cast<double>(best_num) / static_cast<double>(n_pos * n_neg);
  out.confusion = confusion_at(scores, labels, best_threshold);
  out.metrics = confusion_metrics(out.confusion);
  return out;
}

MeanSe mean_se(std::span<const double> values) {
  MeanSe s;
  s.n = values.size();
  if (values.empty()) return s;
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

nlohmann::json metrics_to_json(const MetricSet& m) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {
      {"ppv", opt(m.ppv)},
      {"npv", opt(m.npv)},
      {"tpr", opt(m.tpr)},
      {"tnr", opt(m.tnr)},
      {"balanced_accuracy", opt(m.balanced_accuracy)},
      {"error_rate", opt(m.error_rate)},
  };
}

nlohmann::json confusion_to_json(const ConfusionTable& ct) {
  return {{"tp", ct.tp}, {"fp", ct.fp}, {"fn", ct.fn}, {"tn", ct.tn}};
}

nlohmann::json mean_se_to_json(const MeanSe& s) {
  return {{"mean", s.mean}, {"se", s.se}, {"n", s.n},
          {"ci95", {s.ci_low(), s.ci_high()}}};
}

std::string roc_to_csv(const RocResult& roc) {
  std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  out += "threshold,fpr,tpr\n";
  for (const auto& p : roc.curve) {
    out += format_double(p.threshold) + "," + format_double(p.fpr) + "," +
           format_double(p.tpr) + "\n";
  }
  return out;
}

}  // namespace dominet
