#include "dominet/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dominet/error.hpp"
#include "dominet/normal.hpp"
#include "dominet/parallel.hpp"

namespace dominet {
namespace {

constexpr double kLoadingFloor = 1e-12;
constexpr double kAdaptiveBetaFloor = 1e-8;
constexpr int kAdaptiveGridSize = 100;

void check_inputs(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  if (y.size() != X.rows()) {
    throw Error(ErrorCode::Dimension,
                "response has " + std::to_string(y.size()) + " rows, design has " +
                    std::to_string(X.rows()));
  }
  if (X.rows() < 2) {
    throw Error(ErrorCode::InsufficientData, "lasso needs at least 2 observations");
  }
  if (X.cols() < 1) throw Error(ErrorCode::Dimension, "lasso needs at least 1 regressor");
  if (!y.allFinite() || !X.allFinite()) {
    throw Error(ErrorCode::NumericInput, "NaN or Inf in lasso input");
  }
}

// OLS of y on the columns where beta is nonzero; zero elsewhere.
Eigen::VectorXd post_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& beta) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) != 0.0) support.push_back(j);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(beta.size());
  if (support.empty()) return out;
  Eigen::MatrixXd Xs(X.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    Xs.col(static_cast<Eigen::Index>(k)) = X.col(support[k]);
  }
  const Eigen::VectorXd coef = Xs.colPivHouseholderQr().solve(y);
  for (std::size_t k = 0; k < support.size(); ++k) {
    out(support[k]) = coef(static_cast<Eigen::Index>(k));
  }
  return out;
}

void finish_fit(NodewiseFit& fit, const Eigen::VectorXd& y,
                const Eigen::MatrixXd& X, bool post) {
  fit.mask.assign(static_cast<std::size_t>(fit.beta.size()), false);
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    fit.mask[static_cast<std::size_t>(j)] = fit.beta(j) != 0.0;
  }
  const auto n = static_cast<double>(y.size());
  fit.lasso_residual_variance = (y - X * fit.beta).squaredNorm() / n;
  fit.post_beta = post ? post_ols(y, X, fit.beta) : fit.beta;
  fit.residual_variance =
      post ? (y - X * fit.post_beta).squaredNorm() / n : fit.lasso_residual_variance;
}

double max_relative_change(const Eigen::VectorXd& prev, const Eigen::VectorXd& next) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < prev.size(); ++j) {
    worst = std::max(worst, std::fabs(next(j) - prev(j)) / prev(j));
  }
  return worst;
}

}  // namespace

void LassoConfig::validate() const {
  if (!(c >= 1.0)) throw Error(ErrorCode::Spec, "lasso slack c must be >= 1");
  if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) {
    throw Error(ErrorCode::Spec, "lasso gamma must lie in (0, 1)");
  }
  if (max_loading_iters < 1 || cd_max_iters < 1) {
    throw Error(ErrorCode::Spec, "lasso iteration caps must be positive");
  }
  if (!(loading_tol > 0.0) || !(cd_tol > 0.0)) {
    throw Error(ErrorCode::Spec, "lasso tolerances must be positive");
  }
  if (lambda_override && !(*lambda_override >= 0.0)) {
    throw Error(ErrorCode::Spec, "lambda override must be non-negative");
  }
}

double LassoConfig::gamma_for(double n) const {
  return gamma ? *gamma : 0.1 / std::log(n);
}

std::size_t NodewiseFit::nonzeros() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

double rigorous_lambda(double n, std::size_t p, const LassoConfig& cfg) {
  if (!(n >= 2.0) || p < 1) {
    throw Error(ErrorCode::InsufficientData, "rigorous lambda needs n >= 2 and p >= 1");
  }
  const double tail = cfg.gamma_for(n) / (2.0 * static_cast<double>(p));
  if (!(tail > 0.0 && tail < 0.5)) {
    throw Error(ErrorCode::InvalidProbability,
                "gamma/(2p) = " + std::to_string(tail) + " is outside (0, 0.5)");
  }
  return 2.0 * cfg.c * std::sqrt(n) * normal_quantile(1.0 - tail);
}

Eigen::VectorXd penalty_loadings(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& residuals,
                                 bool autocorrelation_robust) {
  if (residuals.size() != X.rows()) {
    throw Error(ErrorCode::Dimension,
                "residuals have length " + std::to_string(residuals.size()) +
                    ", design has " + std::to_string(X.rows()) + " rows");
  }
  const Eigen::Index t = X.rows();
  const auto tt = static_cast<double>(t);
  // Bartlett bandwidth, Newey-West rule of thumb.
  const int lags = autocorrelation_robust
                       ? static_cast<int>(std::floor(4.0 * std::pow(tt / 100.0, 2.0 / 9.0)))
                       : 0;
  Eigen::VectorXd psi(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const Eigen::VectorXd score =
        (X.col(j).array() - X.col(j).mean()) * residuals.array();
    double var = score.squaredNorm() / tt;
    for (int l = 1; l <= lags && l < t; ++l) {
      const double w = 1.0 - static_cast<double>(l) / (lags + 1.0);
      var += 2.0 * w * score.head(t - l).dot(score.tail(t - l)) / tt;
    }
    psi(j) = std::max(std::sqrt(std::max(var, 0.0)), kLoadingFloor);
  }
  return psi;
}

double lasso_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& beta, double lambda,
                       const Eigen::VectorXd& psi) {
  const auto t = static_cast<double>(y.size());
  const double rss = (y - X * beta).squaredNorm();
  return rss / t + lambda / t * psi.cwiseProduct(beta.cwiseAbs()).sum();
}

double kkt_violation(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& beta, double lambda,
                     const Eigen::VectorXd& psi) {
  const auto t = static_cast<double>(y.size());
  const Eigen::VectorXd grad = (2.0 / t) * (X.transpose() * (y - X * beta));
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double pen = lambda / t * psi(j);
    if (beta(j) != 0.0) {
      const double s = beta(j) > 0.0 ? 1.0 : -1.0;
      worst = std::max(worst, std::fabs(grad(j) - pen * s));
    } else {
      worst = std::max(worst, std::fabs(grad(j)) - pen);
    }
  }
  return worst;
}

DescentResult coordinate_descent(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, double lambda,
                                 const Eigen::VectorXd& psi,
                                 Eigen::VectorXd& beta, double tol,
                                 int max_sweeps,
                                 std::vector<double>* objective_trace) {
  const Eigen::Index p = X.cols();
  const Eigen::VectorXd col_ss = X.colwise().squaredNorm().transpose();
  Eigen::VectorXd resid = y - X * beta;
  DescentResult result;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = beta(j);
      double updated = 0.0;
      if (col_ss(j) > 0.0) {
        const double z = X.col(j).dot(resid) + col_ss(j) * old;
        updated = soft_threshold(z, 0.5 * lambda * psi(j)) / col_ss(j);
      }
      if (updated != old) {
        resid.noalias() -= (updated - old) * X.col(j);
        beta(j) = updated;
        max_change = std::max(max_change, std::fabs(updated - old));
      }
    }
    result.sweeps = sweep + 1;
    if (objective_trace) {
      objective_trace->push_back(lasso_objective(y, X, beta, lambda, psi));
    }
    if (max_change < tol) {
      // Small steps can still leave a KKT residual of order p * tol.
      if (kkt_violation(y, X, beta, lambda, psi) <= 10.0 * tol) {
        result.converged = true;
        break;
      }
      resid = y - X * beta;
    }
  }
  return result;
}

NodewiseFit fit_rigorous_lasso(const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& X,
                               const LassoConfig& cfg) {
  cfg.validate();
  check_inputs(y, X);
  const auto n = static_cast<double>(X.rows());
  NodewiseFit fit;
  fit.lambda = cfg.lambda_override
                   ? *cfg.lambda_override
                   : rigorous_lambda(n, static_cast<std::size_t>(X.cols()), cfg);
  fit.beta = Eigen::VectorXd::Zero(X.cols());

  const Eigen::VectorXd initial_resid = y.array() - y.mean();
  Eigen::VectorXd psi = penalty_loadings(X, initial_resid, cfg.autocorrelation_robust);
  bool descent_ok = true;
  for (int iter = 1; iter <= cfg.max_loading_iters; ++iter) {
    const auto cd = coordinate_descent(X, y, fit.lambda, psi, fit.beta,
                                       cfg.cd_tol, cfg.cd_max_iters);
    fit.psi = psi;
    fit.loading_iterations = iter;
    fit.cd_sweeps = cd.sweeps;
    descent_ok = cd.converged;
    const Eigen::VectorXd resid =
        cfg.post_lasso ? Eigen::VectorXd(y - X * post_ols(y, X, fit.beta))
                       : Eigen::VectorXd(y - X * fit.beta);
    Eigen::VectorXd next = penalty_loadings(X, resid, cfg.autocorrelation_robust);
    if (max_relative_change(psi, next) < cfg.loading_tol) {
      fit.loadings_converged = true;
      break;
    }
    psi = std::move(next);
  }
  // The returned psi is the one the returned beta solves for.
  fit.converged = descent_ok;
  finish_fit(fit, y, X, cfg.post_lasso);
  return fit;
}

NodewiseFit fit_adaptive_lasso(const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& X,
                               InformationCriterion criterion,
                               const LassoConfig& cfg) {
  cfg.validate();
  check_inputs(y, X);
  const Eigen::Index t = X.rows();
  const Eigen::Index p = X.cols();
  const auto tt = static_cast<double>(t);

  Eigen::VectorXd initial(p);
  if (p >= t) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double ss = X.col(j).squaredNorm();
      initial(j) = ss > 0.0 ? X.col(j).dot(y) / ss : 0.0;
    }
  } else {
    initial = X.colPivHouseholderQr().solve(y);
  }
  NodewiseFit fit;
  fit.psi.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    fit.psi(j) = 1.0 / std::max(std::fabs(initial(j)), kAdaptiveBetaFloor);
  }
  fit.beta = Eigen::VectorXd::Zero(p);
  fit.loading_iterations = 1;
  fit.loadings_converged = true;

  const Eigen::VectorXd xty = X.transpose() * y;
  double lambda_max = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    lambda_max = std::max(lambda_max, 2.0 * std::fabs(xty(j)) / fit.psi(j));
  }
  if (lambda_max == 0.0) {
    fit.lambda = 0.0;
    fit.converged = true;
    finish_fit(fit, y, X, false);
    return fit;
  }

  const double penalty_per_df =
      criterion == InformationCriterion::Bic ? std::log(tt) : 2.0;
  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd path_beta = Eigen::VectorXd::Zero(p);
  for (int k = 0; k < kAdaptiveGridSize; ++k) {
    const double lambda =
        lambda_max * std::pow(10.0, -4.0 * k / (kAdaptiveGridSize - 1.0));
    const auto cd = coordinate_descent(X, y, lambda, fit.psi, path_beta,
                                       cfg.cd_tol, cfg.cd_max_iters);
    const double rss = (y - X * path_beta).squaredNorm();
    const double df = static_cast<double>((path_beta.array() != 0.0).count());
    const double score =
        tt * std::log(std::max(rss / tt, 1e-300)) + penalty_per_df * df;
    if (score < best_score) {
      best_score = score;
      fit.beta = path_beta;
      fit.lambda = lambda;
      fit.cd_sweeps = cd.sweeps;
      fit.converged = cd.converged;
    }
  }
  finish_fit(fit, y, X, false);
  return fit;
}

Eigen::MatrixXd others_matrix(const Eigen::MatrixXd& values, Eigen::Index unit) {
  const Eigen::Index n = values.cols();
  Eigen::MatrixXd X(values.rows(), n - 1);
  if (unit > 0) X.leftCols(unit) = values.leftCols(unit);
  if (unit < n - 1) X.rightCols(n - 1 - unit) = values.rightCols(n - 1 - unit);
  return X;
}

namespace {

NodewiseFit fit_unit(const StandardizedPanel& sp, std::size_t unit,
                     const LassoConfig& cfg, LassoMethod method,
                     InformationCriterion criterion) {
  const auto idx = static_cast<Eigen::Index>(unit);
  try {
    const Eigen::VectorXd y = sp.values.col(idx);
    const Eigen::MatrixXd X = others_matrix(sp.values, idx);
    NodewiseFit fit = method == LassoMethod::Rigorous
                          ? fit_rigorous_lasso(y, X, cfg)
                          : fit_adaptive_lasso(y, X, criterion, cfg);
    fit.unit_index = unit;
    return fit;
  } catch (const Error& e) {
    throw Error(e.code(), "unit '" + sp.unit_ids[unit] + "': " + e.what());
  }
}

void check_panel(const StandardizedPanel& sp) {
  if (sp.values.cols() < 2) {
    throw Error(ErrorCode::InsufficientData, "nodewise regressions need at least 2 units");
  }
  if (static_cast<std::size_t>(sp.values.cols()) != sp.unit_ids.size()) {
    throw Error(ErrorCode::Dimension, "unit id count does not match panel columns");
  }
}

}  // namespace

std::vector<NodewiseFit> nodewise_regressions(const StandardizedPanel& sp,
                                              const LassoConfig& cfg,
                                              LassoMethod method,
                                              InformationCriterion criterion) {
  check_panel(sp);
  cfg.validate();
  std::vector<NodewiseFit> fits(sp.unit_ids.size());
  parallel::for_each_index(fits.size(), [&](std::size_t i) {
    fits[i] = fit_unit(sp, i, cfg, method, criterion);
  });
  return fits;
}

std::vector<NodewiseFit> nodewise_regressions_serial(const StandardizedPanel& sp,
                                                     const LassoConfig& cfg,
                                                     LassoMethod method,
                                                     InformationCriterion criterion) {
  check_panel(sp);
  cfg.validate();
  std::vector<NodewiseFit> fits;
  fits.reserve(sp.unit_ids.size());
  for (std::size_t i = 0; i < sp.unit_ids.size(); ++i) {
    fits.push_back(fit_unit(sp, i, cfg, method, criterion));
  }
  return fits;
}

nlohmann::json fit_to_json(const NodewiseFit& fit,
                           const std::vector<std::string>& unit_ids) {
  nlohmann::json nz = nlohmann::json::array();
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    if (!fit.mask[static_cast<std::size_t>(j)]) continue;
    // Regressor j skips the unit's own column.
    const auto other = static_cast<std::size_t>(j) +
                       (static_cast<std::size_t>(j) >= fit.unit_index ? 1 : 0);
    nz.push_back({{"index", j},
                  {"unit", other < unit_ids.size() ? unit_ids[other] : ""},
                  {"value", fit.beta(j)},
                  {"post_value", fit.post_beta(j)}});
  }
  return {
      {"unit", fit.unit_index < unit_ids.size() ? unit_ids[fit.unit_index] : ""},
      {"lambda", fit.lambda},
      {"psi", std::vector<double>(fit.psi.data(), fit.psi.data() + fit.psi.size())},
      {"nonzero", nz},
      {"residual_variance", fit.residual_variance},
      {"lasso_residual_variance", fit.lasso_residual_variance},
      {"loading_iterations", fit.loading_iterations},
      {"cd_sweeps", fit.cd_sweeps},
      {"converged", fit.converged},
      {"loadings_converged", fit.loadings_converged},
  };
}

}  // namespace dominet
