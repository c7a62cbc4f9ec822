#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "dominet/panel.hpp"

namespace dominet {

struct LassoConfig {
  double c = 1.1;
  /// Probability of the regularisation event; unset means 0.1 / ln(n).
  std::optional<double> gamma;
  int max_loading_iters = 15;
  double loading_tol = 1e-4;
  double cd_tol = 1e-8;
  int cd_max_iters = 10000;
  /// Bartlett-kernel HAC loadings instead of the heteroskedasticity-robust form.
  bool autocorrelation_robust = false;
  /// Replaces the plug-in penalty level when set.
  std::optional<double> lambda_override;
  /// Rigorous method: loading updates, post_beta and residual_variance come
  /// from an OLS refit on the lasso support instead of the lasso residuals.
  bool post_lasso = true;

  void validate() const;
  double gamma_for(double n) const;
};

enum class LassoMethod { Rigorous, Adaptive };
enum class InformationCriterion { Bic, Aic };

/// One nodewise regression: unit `unit_index` on the other N-1 units.
/// `mask[j]` is set iff `beta[j] != 0`. `beta` is the penalized solution
/// for (lambda, psi); `post_beta` is the OLS refit on its support when
/// post-lasso is on and equals `beta` otherwise.
struct NodewiseFit {
  std::size_t unit_index = 0;
  Eigen::VectorXd beta;
  Eigen::VectorXd post_beta;
  std::vector<bool> mask;
  double lambda = 0.0;
  Eigen::VectorXd psi;
  /// Mean squared residual of post_beta.
  double residual_variance = 0.0;
  /// Mean squared residual of beta.
  double lasso_residual_variance = 0.0;
  int loading_iterations = 0;
  int cd_sweeps = 0;
  bool converged = false;
  bool loadings_converged = false;

  std::size_t nonzeros() const;
};

double soft_threshold(double z, double t);

/// 2 c sqrt(n) * Phi^{-1}(1 - gamma / (2p)).
double rigorous_lambda(double n, std::size_t p, const LassoConfig& cfg);

/// psi_j = sqrt(mean_t(xdd_{t,j}^2 eps_t^2)), xdd the demeaned column,
/// floored at 1e-12. With `autocorrelation_robust` the Bartlett-weighted
/// autocovariances of x_{t,j} eps_t are added.
Eigen::VectorXd penalty_loadings(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& residuals,
                                 bool autocorrelation_robust = false);

/// (1/T) sum_t (y_t - X_t b)^2 + (lambda/T) sum_j psi_j |b_j|.
double lasso_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& beta, double lambda,
                       const Eigen::VectorXd& psi);

/// Largest |(2/T) X_j'e - (lambda/T) psi_j sign(b_j)| over the active set and
/// excess of |(2/T) X_j'e| over (lambda/T) psi_j over the inactive set.
double kkt_violation(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& beta, double lambda,
                     const Eigen::VectorXd& psi);

struct DescentResult {
  int sweeps = 0;
  bool converged = false;
};

/// Cyclic coordinate descent for the weighted lasso at fixed lambda and psi.
/// `beta` is the warm start and receives the solution. Converged means the
/// last sweep moved no coefficient by `tol` or more and the KKT residual is
/// within 10 * tol. `objective_trace`, if given, receives the objective
/// after every sweep.
DescentResult coordinate_descent(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, double lambda,
                                 const Eigen::VectorXd& psi,
                                 Eigen::VectorXd& beta, double tol,
                                 int max_sweeps,
                                 std::vector<double>* objective_trace = nullptr);

/// Plug-in ("rigorous") lasso with iterated penalty loadings. Columns of X
/// are expected to be standardized.
NodewiseFit fit_rigorous_lasso(const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& X,
                               const LassoConfig& cfg);

/// Adaptive lasso: psi_j = 1/|b0_j| from OLS (univariate when p >= T), lambda
/// chosen by the information criterion over a 100-point log grid from the
/// all-zero threshold down to 1e-4 of it. Uses cfg's descent tolerances.
NodewiseFit fit_adaptive_lasso(const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& X,
                               InformationCriterion criterion,
                               const LassoConfig& cfg = {});

/// Regresses every unit on all others, in parallel across units.
std::vector<NodewiseFit> nodewise_regressions(
    const StandardizedPanel& sp, const LassoConfig& cfg, LassoMethod method,
    InformationCriterion criterion = InformationCriterion::Bic);

/// Serial reference for nodewise_regressions.
std::vector<NodewiseFit> nodewise_regressions_serial(
    const StandardizedPanel& sp, const LassoConfig& cfg, LassoMethod method,
    InformationCriterion criterion = InformationCriterion::Bic);

/// Design matrix of every column except `unit`, in original order.
Eigen::MatrixXd others_matrix(const Eigen::MatrixXd& values, Eigen::Index unit);

nlohmann::json fit_to_json(const NodewiseFit& fit,
                           const std::vector<std::string>& unit_ids);

}  // namespace dominet
