#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dominet/config.hpp"
#include "dominet/network.hpp"

namespace dominet {

struct NetworkResult {
  std::vector<std::string> unit_ids;
  std::vector<NodewiseFit> fits;
  CoefficientMatrix coefficients;
  ConcentrationMatrix concentration;
  Eigen::VectorXd norms;
  DominanceRanking ranking;
  std::optional<NormDensityDiagnostic> diagnostic;
};

/// standardize -> nodewise regressions -> stack -> concentration -> norms
/// -> dominant count. The diagnostic uses per-unit mean levels as densities.
NetworkResult run_network(const Panel& panel, const RunConfig& cfg);

/// Each command writes schema-versioned artifacts into cfg.out_dir and a
/// short human summary to `log`.
void cmd_network(const std::filesystem::path& panel_csv, const RunConfig& cfg,
                 std::ostream& log);
void cmd_classify(const std::filesystem::path& features_csv,
                  const std::optional<std::filesystem::path>& labels_csv,
                  const RunConfig& cfg, std::ostream& log);
void cmd_tune(const std::filesystem::path& features_csv,
              const std::optional<std::filesystem::path>& labels_csv,
              const RunConfig& cfg, std::ostream& log);
/// kind: "panel", "classification" or "both".
void cmd_synth(const std::string& kind, const RunConfig& cfg, std::ostream& log);
/// Summarizes the reports found in `dir` without modifying anything.
void cmd_report(const std::filesystem::path& dir, std::ostream& log);

}  // namespace dominet
