#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace dominet {

/// Units x time incidence panel. `values` is T x N: one row per period,
/// one column per unit.
struct Panel {
  std::vector<std::string> unit_ids;
  std::vector<std::string> time_index;
  Eigen::MatrixXd values;

  Eigen::Index periods() const { return values.rows(); }
  Eigen::Index units() const { return values.cols(); }
};

/// First-differenced panel with every column scaled to mean 0 and sample
/// standard deviation 1. `column_means`/`column_sds` describe the
/// differenced series before scaling.
struct StandardizedPanel {
  std::vector<std::string> unit_ids;
  std::vector<std::string> time_index;
  Eigen::MatrixXd values;
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_sds;
};

enum class MissingPolicy { DropUnit, Fail };

struct PanelLoad {
  Panel panel;
  std::vector<std::string> dropped_units;
};

/// Checks id uniqueness, strictly increasing ISO-8601 dates, shape and
/// finiteness. Throws Error(Validation) on violation.
void validate_panel(const Panel& p);

/// Parses `YYYY-MM-DD` (optionally followed by `T...`); returns false if
/// malformed or not a calendar date.
bool parse_iso_date(const std::string& text, int& year, int& month, int& day);

PanelLoad parse_panel_csv(std::string_view text, std::string_view source,
                          MissingPolicy policy);
PanelLoad load_panel_csv(const std::filesystem::path& path, MissingPolicy policy);
std::string panel_to_csv(const Panel& p);

/// Removes the listed units. Unknown ids are a validation error.
Panel exclude_units(const Panel& p, const std::vector<std::string>& ids);

Panel first_difference(const Panel& p);
StandardizedPanel scale_columns(const Panel& p);

inline StandardizedPanel standardize(const Panel& p) {
  return scale_columns(first_difference(p));
}

}  // namespace dominet
