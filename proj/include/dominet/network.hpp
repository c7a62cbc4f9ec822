#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "json.hpp"
#include "dominet/lasso.hpp"

namespace dominet {

/// Stacked nodewise coefficients. Row i holds unit i's regression on the
/// other units, so B(i, j) != 0 means unit j enters unit i's equation.
/// The diagonal is exactly zero.
struct CoefficientMatrix {
  std::vector<std::string> unit_ids;
  Eigen::MatrixXd B;
};

/// K = diag(1 / sigma_i^2) (I - B).
struct ConcentrationMatrix {
  std::vector<std::string> unit_ids;
  Eigen::MatrixXd K;
  Eigen::VectorXd residual_precisions;
};

struct DominanceRanking {
  std::vector<std::string> ordered_units;
  /// Original column index of each ranked unit.
  std::vector<std::size_t> order;
  /// Column norms in ranking order (non-increasing).
  Eigen::VectorXd norms;
  /// norms[i] / norms[i+1]; +inf at the first zero successor, NaN after it.
  std::vector<double> growth_ratios;
  std::size_t k = 1;
};

struct Edge {
  std::string source;
  std::string target;
  double weight = 0.0;
};

struct NormDensityDiagnostic {
  std::size_t n = 0;
  double correlation = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r_squared = 0.0;
};

/// Uses each fit's post_beta when it is filled in, otherwise beta.
CoefficientMatrix stack_coefficients(const std::vector<NodewiseFit>& fits,
                                     const std::vector<std::string>& unit_ids);

ConcentrationMatrix concentration(const CoefficientMatrix& coefficients,
                                  const Eigen::VectorXd& residual_variances);

/// L2 norm of every column of K, computed in parallel over columns.
Eigen::VectorXd column_norms(const ConcentrationMatrix& conc);
Eigen::VectorXd column_norms_serial(const ConcentrationMatrix& conc);

/// Sorts descending (stable, so ties keep original order) and picks the
/// smallest k in [1, N-1] maximizing norms[k-1] / norms[k].
DominanceRanking dominant_count(const Eigen::VectorXd& norms,
                                const std::vector<std::string>& unit_ids);

/// One edge per nonzero off-diagonal B(i, j), directed from the regressor
/// unit j to the regressed unit i.
std::vector<Edge> edge_list(const CoefficientMatrix& coefficients);

/// Regresses norms on densities by OLS and reports the fit.
NormDensityDiagnostic norm_density_diagnostic(const Eigen::VectorXd& norms,
                                              const Eigen::VectorXd& densities);

nlohmann::json ranking_to_json(const DominanceRanking& ranking);
std::string ranking_to_csv(const DominanceRanking& ranking);
std::string edges_to_csv(const std::vector<Edge>& edges);
nlohmann::json diagnostic_to_json(const NormDensityDiagnostic& diag);

}  // namespace dominet
