#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "dominet/label.hpp"

namespace dominet {

/// Units x features table. `values` is M x p.
struct FeatureMatrix {
  std::vector<std::string> unit_ids;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd values;
  std::optional<std::vector<Label>> labels;

  std::size_t units() const { return unit_ids.size(); }
  std::size_t features() const { return feature_names.size(); }

  void validate() const;
  /// Throws Error(Label) if labels are absent.
  const std::vector<Label>& require_labels() const;
  FeatureMatrix select_features(const std::vector<std::size_t>& columns) const;
  FeatureMatrix select_units(const std::vector<std::size_t>& rows) const;
};

struct FilterReport {
  std::vector<std::string> removed_nzv;
  std::vector<std::string> removed_corr;
  std::vector<std::string> surviving;
  double cutoff = 0.0;
};

struct NzvOptions {
  double freq_ratio_cut = 19.0;
  double unique_pct_cut = 10.0;
};

/// Drops column j iff (most common count / second most common count) >
/// freq_ratio_cut and 100 * distinct / M < unique_pct_cut.
std::pair<FeatureMatrix, FilterReport> near_zero_variance_filter(
    const FeatureMatrix& F, double freq_ratio_cut = 19.0,
    double unique_pct_cut = 10.0);

/// |Pearson r| for every column pair, parallel over columns.
Eigen::MatrixXd abs_correlation_matrix(const Eigen::MatrixXd& values);
Eigen::MatrixXd abs_correlation_matrix_serial(const Eigen::MatrixXd& values);

/// Repeatedly takes the most correlated remaining pair above `cutoff` and
/// removes the member with the larger mean |r| against the other remaining
/// columns (ties remove the later column). Features in `keep` are never
/// removed; a pair of two kept features is skipped.
std::pair<FeatureMatrix, FilterReport> correlation_prune(
    const FeatureMatrix& F, double cutoff = 0.85,
    const std::vector<std::string>& keep = {});

/// Near-zero-variance filter followed by correlation pruning, with one
/// combined report.
std::pair<FeatureMatrix, FilterReport> preprocess_features(
    const FeatureMatrix& F, const NzvOptions& nzv, double cutoff,
    const std::vector<std::string>& keep = {});

struct GroupMeans {
  std::string feature;
  double follower_mean = 0.0;
  double dominant_mean = 0.0;
};

/// Per-class feature means. With `ordering`, rows follow that list of
/// feature names (names not present are skipped); otherwise column order.
std::vector<GroupMeans> group_mean_differences(
    const FeatureMatrix& F, const std::vector<std::string>* ordering = nullptr);

/// Feature CSV: header `unit,label,<feature...>`; label is dominant,
/// follower or empty. All-empty labels load as an unlabeled matrix.
FeatureMatrix parse_feature_csv(std::string_view text, std::string_view source);
FeatureMatrix load_feature_csv(const std::filesystem::path& path);
std::string feature_matrix_to_csv(const FeatureMatrix& F);

/// Reads `unit,label` rows and assigns labels to F's units. Every unit of F
/// must be labeled.
void apply_label_csv(FeatureMatrix& F, const std::filesystem::path& path);

nlohmann::json filter_report_to_json(const FilterReport& report);
std::string group_means_to_csv(const std::vector<GroupMeans>& rows);

}  // namespace dominet
