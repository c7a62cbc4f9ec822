#include <cmath>
#include <limits>

#include "doctest.h"
#include "dominet/error.hpp"
#include "dominet/lasso.hpp"
#include "dominet/normal.hpp"
#include "dominet/parallel.hpp"
#include "test_util.hpp"

using namespace dominet;

namespace {

long double bisect_quantile(long double p) {
  long double lo = -40.0L, hi = 40.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = (lo + hi) / 2.0L;
    (0.5L * std::erfc(-mid / std::sqrt(2.0L)) < p ? lo : hi) = mid;
  }
  return (lo + hi) / 2.0L;
}

// Exact weighted-lasso minimum: every (support, sign) pattern's stationary
// point is solved in closed form and kept if its signs are consistent.
double enumeration_minimum(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double lambda,
                           const Eigen::VectorXd& psi) {
  const int p = static_cast<int>(X.cols());
  double best = lasso_objective(y, X, Eigen::VectorXd::Zero(p), lambda, psi);
  for (int mask = 1; mask < (1 << p); ++mask) {
    std::vector<int> S;
    for (int j = 0; j < p; ++j) {
      if (mask & (1 << j)) S.push_back(j);
    }
    const int k = static_cast<int>(S.size());
    Eigen::MatrixXd Xs(X.rows(), k);
    for (int a = 0; a < k; ++a) Xs.col(a) = X.col(S[a]);
    const Eigen::MatrixXd G = Xs.transpose() * Xs;
    const Eigen::VectorXd c = Xs.transpose() * y;
    for (int signs = 0; signs < (1 << k); ++signs) {
      Eigen::VectorXd rhs = c;
      Eigen::VectorXd s(k);
      for (int a = 0; a < k; ++a) {
        s(a) = (signs & (1 << a)) ? 1.0 : -1.0;
        rhs(a) -= lambda / 2.0 * psi(S[a]) * s(a);
      }
      const Eigen::VectorXd b = G.ldlt().solve(rhs);
      bool ok = true;
      for (int a = 0; a < k; ++a) ok = ok && b(a) * s(a) > 0.0;
      if (!ok) continue;
      Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
      for (int a = 0; a < k; ++a) full(S[a]) = b(a);
      best = std::min(best, lasso_objective(y, X, full, lambda, psi));
    }
  }
  return best;
}

struct Instance {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Instance random_instance(std::uint64_t seed, int t, int p, double signal = 0.6) {
  Rng rng(seed);
  Instance in;
  in.X = testutil::standardize_columns(testutil::gaussian_matrix(rng, t, p));
  in.y = Eigen::VectorXd::Zero(t);
  for (int j = 0; j < p; ++j) {
    if (j % 2 == 0) in.y += signal * (j % 4 == 0 ? 1.0 : -1.0) * in.X.col(j);
  }
  for (int i = 0; i < t; ++i) in.y(i) += standard_normal(rng);
  return in;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Usage;
}

}  // namespace

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  CHECK(soft_threshold(1.0, 1.0) == 0.0);
}

TEST_CASE("rigorous_lambda: n=100, p=76 default gamma") {
  LassoConfig cfg;
  const double gamma = 0.1 / std::log(100.0);
  CHECK(cfg.gamma_for(100.0) == doctest::Approx(0.021715).epsilon(1e-4));
  const double oracle =
      2.0 * 1.1 * 10.0 * static_cast<double>(bisect_quantile(1.0L - gamma / 152.0L));
  const double lambda = rigorous_lambda(100.0, 76, cfg);
  CHECK(lambda == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(std::fabs(lambda - 79.9) < 0.1);
}

TEST_CASE("rigorous_lambda: linear in c") {
  LassoConfig a, b;
  a.c = 1.1;
  b.c = 1.1 * 2.5;
  CHECK(rigorous_lambda(80.0, 10, b) == doctest::Approx(2.5 * rigorous_lambda(80.0, 10, a)).epsilon(1e-14));
}

TEST_CASE("rigorous_lambda: p=1, gamma=0.5 hits the 0.75 quantile") {
  LassoConfig cfg;
  cfg.gamma = 0.5;
  const double n = 64.0;
  CHECK(std::fabs(rigorous_lambda(n, 1, cfg) / (2.0 * 1.1 * 8.0) - 0.674490) < 1e-5);
}

TEST_CASE("config validation") {
  LassoConfig cfg;
  cfg.c = 0.9;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::Spec);
  cfg = {};
  cfg.gamma = 1.0;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::Spec);
  cfg = {};
  cfg.cd_tol = 0.0;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::Spec);
}

TEST_CASE("penalty_loadings: constant residual factors out") {
  Eigen::MatrixXd X(6, 2);
  X << 1, 2, -1, -2, 1, 0, -1, 0, 1, 1, -1, -1;
  // column 0 already has mean 0 and mean square 1
  const Eigen::VectorXd resid = Eigen::VectorXd::Constant(6, -0.7);
  const Eigen::VectorXd psi = penalty_loadings(X, resid);
  CHECK(std::fabs(psi(0) - 0.7) < 1e-10);
}

TEST_CASE("penalty_loadings: hand case and floor") {
  Eigen::MatrixXd X(4, 1);
  X << 1, -1, 1, -1;
  Eigen::VectorXd e(4);
  e << 1, 0, 1, 0;
  CHECK(penalty_loadings(X, e)(0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(penalty_loadings(X, Eigen::VectorXd::Zero(4))(0) == 1e-12);
  CHECK(code_of([&] { penalty_loadings(X, Eigen::VectorXd::Zero(3)); }) == ErrorCode::Dimension);
}

TEST_CASE("penalty_loadings: HAC variant") {
  Rng rng(4);
  const int t = 400;
  Eigen::MatrixXd X(t, 1);
  Eigen::VectorXd e(t);
  double prev = 0.0;
  for (int i = 0; i < t; ++i) {
    prev = 0.8 * prev + standard_normal(rng);
    X(i, 0) = prev;
    e(i) = 1.0;
  }
  const double hc = penalty_loadings(X, e, false)(0);
  const double hac = penalty_loadings(X, e, true)(0);
  CHECK(hac > hc);
  const Eigen::MatrixXd W = testutil::gaussian_matrix(rng, 2000, 1);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2000);
  CHECK(penalty_loadings(W, ones, true)(0) ==
        doctest::Approx(penalty_loadings(W, ones, false)(0)).epsilon(0.1));
}

TEST_CASE("fit: huge lambda gives exact zeros") {
  const Instance in = random_instance(1, 50, 3);
  LassoConfig cfg;
  cfg.lambda_override = 1e6;
  const NodewiseFit fit = fit_rigorous_lasso(in.y, in.X, cfg);
  CHECK(fit.nonzeros() == 0);
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) CHECK(fit.beta(j) == 0.0);
}

TEST_CASE("fit: lambda 0 equals OLS") {
  const Instance in = random_instance(2, 60, 4);
  LassoConfig cfg;
  cfg.lambda_override = 0.0;
  cfg.cd_tol = 1e-12;
  cfg.cd_max_iters = 100000;
  const NodewiseFit fit = fit_rigorous_lasso(in.y, in.X, cfg);
  const Eigen::VectorXd ols = in.X.colPivHouseholderQr().solve(in.y);
  CHECK((fit.beta - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit: matches the enumeration oracle and satisfies KKT") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const int p = 1 + static_cast<int>(seed % 4);
    const Instance in = random_instance(seed, 50, p);
    LassoConfig cfg;
    const NodewiseFit fit = fit_rigorous_lasso(in.y, in.X, cfg);
    REQUIRE(fit.converged);
    const double got = lasso_objective(in.y, in.X, fit.beta, fit.lambda, fit.psi);
    const double best = enumeration_minimum(in.y, in.X, fit.lambda, fit.psi);
    CHECK(got - best < 1e-9);
    CHECK(got - best > -1e-9);
    CHECK(kkt_violation(in.y, in.X, fit.beta, fit.lambda, fit.psi) <= 10.0 * cfg.cd_tol);
  }
}

TEST_CASE("fit: mask mirrors exact zeros and post_beta is OLS on the support") {
  const Instance in = random_instance(9, 80, 6, 0.8);
  const NodewiseFit fit = fit_rigorous_lasso(in.y, in.X, LassoConfig{});
  REQUIRE(fit.nonzeros() > 0);
  std::vector<Eigen::Index> S;
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    CHECK(fit.mask[static_cast<std::size_t>(j)] == (fit.beta(j) != 0.0));
    if (fit.beta(j) != 0.0) S.push_back(j);
    else CHECK(fit.post_beta(j) == 0.0);
  }
  Eigen::MatrixXd Xs(in.X.rows(), static_cast<Eigen::Index>(S.size()));
  for (std::size_t k = 0; k < S.size(); ++k) Xs.col(static_cast<Eigen::Index>(k)) = in.X.col(S[k]);
  const Eigen::VectorXd ols = (Xs.transpose() * Xs).ldlt().solve(Xs.transpose() * in.y);
  for (std::size_t k = 0; k < S.size(); ++k) {
    CHECK(fit.post_beta(S[k]) == doctest::Approx(ols(static_cast<Eigen::Index>(k))).epsilon(1e-9));
  }
  const double rv = (in.y - in.X * fit.post_beta).squaredNorm() / 80.0;
  CHECK(fit.residual_variance == doctest::Approx(rv).epsilon(1e-12));
  const double lrv = (in.y - in.X * fit.beta).squaredNorm() / 80.0;
  CHECK(fit.lasso_residual_variance == doctest::Approx(lrv).epsilon(1e-12));
  CHECK(fit.residual_variance <= fit.lasso_residual_variance);

  LassoConfig plain;
  plain.post_lasso = false;
  const NodewiseFit f2 = fit_rigorous_lasso(in.y, in.X, plain);
  CHECK(f2.post_beta == f2.beta);
  CHECK(f2.residual_variance == f2.lasso_residual_variance);
}

TEST_CASE("coordinate descent: objective never increases") {
  const Instance in = random_instance(3, 50, 8);
  const Eigen::VectorXd psi = Eigen::VectorXd::Ones(8);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(8);
  std::vector<double> trace;
  const auto res = coordinate_descent(in.X, in.y, 20.0, psi, beta, 1e-10, 1000, &trace);
  CHECK(res.converged);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-15);
}

TEST_CASE("nonzero count is non-increasing in lambda") {
  const Instance in = random_instance(5, 60, 10, 0.4);
  const Eigen::VectorXd psi = Eigen::VectorXd::Ones(10);
  std::size_t prev = 11;
  for (double lambda = 1.0; lambda < 400.0; lambda *= 1.3) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
    coordinate_descent(in.X, in.y, lambda, psi, beta, 1e-10, 100000);
    std::size_t nz = 0;
    for (Eigen::Index j = 0; j < 10; ++j) nz += beta(j) != 0.0 ? 1 : 0;
    CHECK(nz <= prev);
    prev = nz;
  }
}

TEST_CASE("permuting regressors permutes coefficients") {
  const Instance in = random_instance(6, 70, 5, 0.7);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  Eigen::MatrixXd Xp(in.X.rows(), 5);
  for (int j = 0; j < 5; ++j) Xp.col(j) = in.X.col(perm[j]);
  const NodewiseFit a = fit_rigorous_lasso(in.y, in.X, LassoConfig{});
  const NodewiseFit b = fit_rigorous_lasso(in.y, Xp, LassoConfig{});
  for (int j = 0; j < 5; ++j) CHECK(b.beta(j) == doctest::Approx(a.beta(perm[j])).epsilon(1e-7));
}

TEST_CASE("fit: non-finite input is a numeric-input error") {
  Instance in = random_instance(7, 20, 2);
  in.X(3, 1) = std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { fit_rigorous_lasso(in.y, in.X, LassoConfig{}); }) == ErrorCode::NumericInput);
}

TEST_CASE("adaptive: support recovered when y is a column") {
  Rng rng(8);
  const Eigen::MatrixXd X = testutil::standardize_columns(testutil::gaussian_matrix(rng, 100, 5));
  const Eigen::VectorXd y = X.col(0);
  // BIC over all 32 OLS subsets picks {0} because its RSS is 0.
  int best_mask = 0;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < 32; ++mask) {
    std::vector<int> S;
    for (int j = 0; j < 5; ++j) {
      if (mask & (1 << j)) S.push_back(j);
    }
    double rss = y.squaredNorm();
    if (!S.empty()) {
      Eigen::MatrixXd Xs(100, static_cast<Eigen::Index>(S.size()));
      for (std::size_t k = 0; k < S.size(); ++k) Xs.col(static_cast<Eigen::Index>(k)) = X.col(S[k]);
      rss = (y - Xs * Xs.colPivHouseholderQr().solve(y)).squaredNorm();
    }
    const double bic = 100.0 * std::log(std::max(rss / 100.0, 1e-300)) +
                       static_cast<double>(S.size()) * std::log(100.0);
    if (bic < best_bic) {
      best_bic = bic;
      best_mask = mask;
    }
  }
  CHECK(best_mask == 1);
  const NodewiseFit fit = fit_adaptive_lasso(y, X, InformationCriterion::Bic);
  CHECK(fit.mask == std::vector<bool>{true, false, false, false, false});
  CHECK(fit.beta(0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("adaptive: zero response gives zero coefficients") {
  Rng rng(9);
  const Eigen::MatrixXd X = testutil::gaussian_matrix(rng, 30, 4);
  const NodewiseFit fit = fit_adaptive_lasso(Eigen::VectorXd::Zero(30), X, InformationCriterion::Aic);
  CHECK(fit.nonzeros() == 0);
}

TEST_CASE("adaptive: chosen solution is the exact weighted-lasso minimum") {
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    const Instance in = random_instance(seed, 50, 2, 0.3);
    const NodewiseFit fit = fit_adaptive_lasso(in.y, in.X, InformationCriterion::Bic);
    const double got = lasso_objective(in.y, in.X, fit.beta, fit.lambda, fit.psi);
    const double best = enumeration_minimum(in.y, in.X, fit.lambda, fit.psi);
    CHECK(std::fabs(got - best) < 1e-8);
  }
}

TEST_CASE("adaptive: wide design uses univariate initial estimates") {
  Rng rng(10);
  const Eigen::MatrixXd X = testutil::standardize_columns(testutil::gaussian_matrix(rng, 20, 30));
  const Eigen::VectorXd y = 2.0 * X.col(4);
  const NodewiseFit fit = fit_adaptive_lasso(y, X, InformationCriterion::Bic);
  CHECK(fit.mask[4]);
}

namespace {

StandardizedPanel noise_panel(std::uint64_t seed, int t, int n) {
  Rng rng(seed);
  StandardizedPanel sp;
  sp.values = testutil::standardize_columns(testutil::gaussian_matrix(rng, t, n));
  for (int i = 0; i < n; ++i) sp.unit_ids.push_back("n" + std::to_string(i));
  return sp;
}

}  // namespace

TEST_CASE("nodewise: N=2 has single-regressor fits") {
  const StandardizedPanel sp = noise_panel(1, 40, 2);
  const auto fits = nodewise_regressions(sp, LassoConfig{}, LassoMethod::Rigorous);
  REQUIRE(fits.size() == 2);
  CHECK(fits[0].beta.size() == 1);
  CHECK(fits[1].unit_index == 1);
}

TEST_CASE("nodewise: independent noise is mostly exact zeros") {
  std::size_t zeros = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto fits = nodewise_regressions(noise_panel(seed, 500, 10), LassoConfig{}, LassoMethod::Rigorous);
    for (const auto& f : fits) {
      total += static_cast<std::size_t>(f.beta.size());
      zeros += static_cast<std::size_t>(f.beta.size()) - f.nonzeros();
    }
  }
  CHECK(static_cast<double>(zeros) >= 0.9 * static_cast<double>(total));
}

TEST_CASE("nodewise: parallel equals serial bit for bit") {
  const StandardizedPanel sp = noise_panel(3, 60, 12);
  for (auto method : {LassoMethod::Rigorous, LassoMethod::Adaptive}) {
    parallel::set_threads(4);
    const auto par = nodewise_regressions(sp, LassoConfig{}, method);
    const auto ser = nodewise_regressions_serial(sp, LassoConfig{}, method);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
      CHECK(par[i].beta == ser[i].beta);
      CHECK(par[i].post_beta == ser[i].post_beta);
      CHECK(par[i].psi == ser[i].psi);
      CHECK(par[i].residual_variance == ser[i].residual_variance);
    }
  }
}

TEST_CASE("nodewise: errors name the unit") {
  StandardizedPanel sp = noise_panel(4, 30, 4);
  sp.values(2, 2) = std::nan("");
  try {
    nodewise_regressions(sp, LassoConfig{}, LassoMethod::Rigorous);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericInput);
    CHECK(std::string(e.what()).find("n0") != std::string::npos);
  }
}

TEST_CASE("others_matrix and fit_to_json") {
  Eigen::MatrixXd v(2, 3);
  v << 1, 2, 3, 4, 5, 6;
  const Eigen::MatrixXd o = others_matrix(v, 1);
  CHECK(o.cols() == 2);
  CHECK(o(1, 0) == 4.0);
  CHECK(o(1, 1) == 6.0);

  NodewiseFit fit;
  fit.unit_index = 1;
  fit.beta = Eigen::VectorXd::Zero(2);
  fit.beta(1) = 0.5;
  fit.post_beta = fit.beta;
  fit.mask = {false, true};
  fit.psi = Eigen::VectorXd::Ones(2);
  const auto j = fit_to_json(fit, {"a", "b", "c"});
  CHECK(j["unit"] == "b");
  REQUIRE(j["nonzero"].size() == 1);
  CHECK(j["nonzero"][0]["unit"] == "c");
  CHECK(j["nonzero"][0]["value"] == 0.5);
}
