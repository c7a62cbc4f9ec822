#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "dominet/metrics.hpp"
#include "dominet/preprocess.hpp"
#include "dominet/rng.hpp"

namespace dominet {

/// What the per-feature selection frequency counts across runs.
enum class FrequencyMode {
  TopKByMdi,   // feature is among the run's top_k by MDI
  SplitUsage,  // feature is used in at least one split of the run
};

struct ForestConfig {
  std::size_t n_trees = 1500;
  /// 0 means floor(sqrt(p)) of the matrix passed in.
  std::size_t mtry = 0;
  std::size_t min_node_size = 1;
  bool stratified = true;
  std::uint64_t seed = 1;
  std::size_t n_runs = 2000;
  std::size_t top_k = 30;
  FrequencyMode frequency_mode = FrequencyMode::TopKByMdi;

  std::size_t resolved_mtry(std::size_t p) const;
  void validate(std::size_t p) const;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double count_follower = 0.0;  // in-bag weight reaching the node
  double count_dominant = 0.0;
  /// Gini decrease of this split times the node's share of in-bag weight.
  double impurity_decrease = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<std::uint32_t> inbag;

  /// 1 if the reached leaf has a dominant majority, 0 for follower, 0.5 tie.
  /// `value(feature)` supplies the unit's feature values.
  template <class ValueFn>
  double vote(ValueFn&& value) const {
    std::size_t at = 0;
    while (nodes[at].feature >= 0) {
      const auto& n = nodes[at];
      at = static_cast<std::size_t>(value(n.feature) <= n.threshold ? n.left : n.right);
    }
    const auto& leaf = nodes[at];
    if (leaf.count_dominant > leaf.count_follower) return 1.0;
    if (leaf.count_dominant < leaf.count_follower) return 0.0;
    return 0.5;
  }

  double vote_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
    return vote([&](std::int32_t f) { return X(row, f); });
  }

  std::size_t depth() const;
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestConfig config;  // mtry resolved
  std::vector<std::string> feature_names;
  std::vector<Label> labels;
  /// Share of dominant votes among trees where the unit was out of bag;
  /// NaN when the unit was never out of bag.
  std::vector<double> oob_probabilities;
  std::vector<std::size_t> oob_coverage;

  std::vector<std::size_t> uncovered_units() const;
};

/// Draws bootstrap multiplicities: per class at the class's own size when
/// stratified, otherwise M draws from all units.
std::vector<std::uint32_t> bootstrap_inbag(std::span<const Label> labels,
                                           bool stratified, Rng& rng);

/// Grows one Gini classification tree on the in-bag units. At each node
/// mtry features are sampled without replacement; thresholds are midpoints
/// of adjacent distinct in-node values; ties prefer the lower feature
/// index, then the lower threshold.
Tree fit_tree(const Eigen::MatrixXd& X, std::span<const Label> labels,
              std::vector<std::uint32_t> inbag, const ForestConfig& cfg, Rng& rng);

/// Trees are grown in parallel; tree t uses stream derive_seed(seed, t).
ForestModel fit_forest(const FeatureMatrix& F, const ForestConfig& cfg);
/// Serial reference for fit_forest; bit-identical output.
ForestModel fit_forest_serial(const FeatureMatrix& F, const ForestConfig& cfg);

/// Share of dominant votes over all trees for each row of X.
std::vector<double> predict_proba(const ForestModel& model, const Eigen::MatrixXd& X);

/// Mean over trees of each feature's summed weighted impurity decrease.
std::vector<double> mdi_importance(const ForestModel& model);

/// Mean over trees (with at least one OOB unit) of OOB accuracy minus OOB
/// accuracy after permuting the feature among that tree's OOB units.
std::vector<double> mda_importance(const ForestModel& model, const FeatureMatrix& F,
                                   std::uint64_t seed);

/// Features used by at least one split.
std::vector<bool> split_usage(const ForestModel& model);

struct RunResult {
  std::uint64_t seed = 0;
  double auc = 0.0;  // NaN if covered units lack a class
  ConfusionTable confusion;  // OOB majority vote, probability > 0.5
  double oob_error = 0.0;
  CutoffResult cutoff;
  std::vector<double> mdi;
  std::vector<double> mda;
  std::vector<bool> used;
  std::vector<double> oob_probabilities;  // NaN for uncovered units
  std::size_t uncovered = 0;
};

struct RunAggregate {
  std::size_t n_runs = 0;
  std::size_t n_units = 0;
  std::vector<std::string> feature_names;
  std::vector<double> mdi_mean;
  std::vector<double> mda_mean;
  std::vector<std::size_t> topk_frequency;
  ConfusionTable confusion_mean;
  ConfusionTable confusion_floored;
  MetricSet floored_metrics;
  MeanSe auc;
  MeanSe oob_error;
  MeanSe ppv, npv, tpr, tnr, balanced_accuracy;
  MeanSe cutoff_threshold;
  MeanSe cutoff_youden;
  std::size_t runs_with_uncovered_units = 0;
  /// Per-unit mean OOB probability over the runs covering the unit.
  std::vector<double> mean_oob_probability;
};

RunResult single_run(const FeatureMatrix& F, const ForestConfig& cfg,
                     std::uint64_t run_seed);

/// n_runs forests with seeds seed + r, aggregated in run order.
RunAggregate multi_run(const FeatureMatrix& F, const ForestConfig& cfg,
                       std::vector<RunResult>* runs = nullptr);

struct TuneRow {
  std::size_t mtry = 0;
  MeanSe auc;
};

struct TuneResult {
  std::size_t best_mtry = 0;
  std::vector<TuneRow> table;
};

/// Repeated stratified k-fold CV of validation AUC per candidate mtry;
/// the best mean wins, ties go to the smaller mtry.
TuneResult tune_mtry(const FeatureMatrix& F, const ForestConfig& cfg,
                     std::vector<std::size_t> grid, std::size_t folds = 5,
                     std::size_t repeats = 5);

nlohmann::json forest_summary_json(const ForestModel& model,
                                   const std::vector<std::string>& unit_ids);
nlohmann::json aggregate_to_json(const RunAggregate& agg);
nlohmann::json tune_to_json(const TuneResult& tune);
/// `feature,mdi_mean,mda_mean,topk_frequency`, ordered by mda_mean descending.
std::string importance_to_csv(const RunAggregate& agg);
/// Feature order by descending mean MDA (ties: lower index first).
std::vector<std::size_t> mda_ranking(const RunAggregate& agg);

/// Full-forest binary dump with a versioned header.
void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace dominet
