#include "dominet/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dominet/csv.hpp"
#include "dominet/error.hpp"
#include "dominet/parallel.hpp"

namespace dominet {

CoefficientMatrix stack_coefficients(const std::vector<NodewiseFit>& fits,
                                     const std::vector<std::string>& unit_ids) {
  const std::size_t n = unit_ids.size();
  if (fits.size() != n) {
    throw Error(ErrorCode::Dimension, "expected " + std::to_string(n) +
                                          " nodewise fits, got " +
                                          std::to_string(fits.size()));
  }
  const auto nn = static_cast<Eigen::Index>(n);
  CoefficientMatrix out{unit_ids, Eigen::MatrixXd::Zero(nn, nn)};
  std::vector<bool> placed(n, false);
  for (const auto& fit : fits) {
    const std::size_t i = fit.unit_index;
    if (i >= n || placed[i]) {
      throw Error(ErrorCode::Dimension,
                  "fit for unit index " + std::to_string(i) + " is out of range or repeated");
    }
    if (static_cast<std::size_t>(fit.beta.size()) + 1 != n) {
      throw Error(ErrorCode::Dimension,
                  "fit for unit '" + unit_ids[i] + "' has " +
                      std::to_string(fit.beta.size()) + " coefficients, expected " +
                      std::to_string(n - 1));
    }
    placed[i] = true;
    const Eigen::VectorXd& coef =
        fit.post_beta.size() == fit.beta.size() ? fit.post_beta : fit.beta;
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
      const Eigen::Index col = j < row ? j : j + 1;
      out.B(row, col) = coef(j);
    }
  }
  return out;
}

ConcentrationMatrix concentration(const CoefficientMatrix& coefficients,
                                  const Eigen::VectorXd& residual_variances) {
  const Eigen::Index n = coefficients.B.rows();
  if (coefficients.B.cols() != n || residual_variances.size() != n) {
    throw Error(ErrorCode::Dimension, "coefficient matrix and variances disagree in size");
  }
  ConcentrationMatrix out;
  out.unit_ids = coefficients.unit_ids;
  out.K.resize(n, n);
  out.residual_precisions.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double var = residual_variances(i);
    if (!(var > 0.0) || !std::isfinite(var)) {
      throw Error(ErrorCode::DegenerateVariance,
                  "unit '" + coefficients.unit_ids[static_cast<std::size_t>(i)] +
                      "' has residual variance " + format_double(var));
    }
    const double prec = 1.0 / var;
    out.residual_precisions(i) = prec;
    for (Eigen::Index j = 0; j < n; ++j) {
      out.K(i, j) = i == j ? prec : -prec * coefficients.B(i, j);
    }
  }
  return out;
}

namespace {

double column_l2(const Eigen::MatrixXd& K, Eigen::Index j) {
  double ss = 0.0;
  for (Eigen::Index i = 0; i < K.rows(); ++i) ss += K(i, j) * K(i, j);
  return std::sqrt(ss);
}

}  // namespace

Eigen::VectorXd column_norms(const ConcentrationMatrix& conc) {
  Eigen::VectorXd norms(conc.K.cols());
  parallel::for_each_index(static_cast<std::size_t>(conc.K.cols()), [&](std::size_t j) {
    const auto col = static_cast<Eigen::Index>(j);
    norms(col) = column_l2(conc.K, col);
  });
  return norms;
}

Eigen::VectorXd column_norms_serial(const ConcentrationMatrix& conc) {
  Eigen::VectorXd norms(conc.K.cols());
  for (Eigen::Index j = 0; j < conc.K.cols(); ++j) norms(j) = column_l2(conc.K, j);
  return norms;
}

DominanceRanking dominant_count(const Eigen::VectorXd& norms,
                                const std::vector<std::string>& unit_ids) {
  const auto n = static_cast<std::size_t>(norms.size());
  if (n < 2) {
    throw Error(ErrorCode::InsufficientData, "dominant count needs at least 2 units");
  }
  if (unit_ids.size() != n) {
    throw Error(ErrorCode::Dimension, "unit ids and norms disagree in length");
  }
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) >= 0.0) || !std::isfinite(norms(i))) {
      throw Error(ErrorCode::DegenerateRanking,
                  "column norm of unit '" + unit_ids[static_cast<std::size_t>(i)] +
                      "' is negative or non-finite");
    }
  }
  if (norms.maxCoeff() == 0.0) {
    throw Error(ErrorCode::DegenerateRanking, "all column norms are zero");
  }

  DominanceRanking out;
  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    return norms(static_cast<Eigen::Index>(a)) > norms(static_cast<Eigen::Index>(b));
  });
  out.norms.resize(norms.size());
  for (std::size_t r = 0; r < n; ++r) {
    out.ordered_units.push_back(unit_ids[out.order[r]]);
    out.norms(static_cast<Eigen::Index>(r)) = norms(static_cast<Eigen::Index>(out.order[r]));
  }

  out.growth_ratios.assign(n - 1, std::numeric_limits<double>::quiet_NaN());
  double best = -1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double next = out.norms(static_cast<Eigen::Index>(i + 1));
    if (next == 0.0) {
      out.growth_ratios[i] = std::numeric_limits<double>::infinity();
      out.k = i + 1;
      break;
    }
    const double ratio = out.norms(static_cast<Eigen::Index>(i)) / next;
    out.growth_ratios[i] = ratio;
    if (ratio > best) {
      best = ratio;
      out.k = i + 1;
    }
  }
  return out;
}

std::vector<Edge> edge_list(const CoefficientMatrix& coefficients) {
  std::vector<Edge> edges;
  const Eigen::Index n = coefficients.B.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || coefficients.B(i, j) == 0.0) continue;
      edges.push_back({coefficients.unit_ids[static_cast<std::size_t>(j)],
                       coefficients.unit_ids[static_cast<std::size_t>(i)],
                       coefficients.B(i, j)});
    }
  }
  return edges;
}

NormDensityDiagnostic norm_density_diagnostic(const Eigen::VectorXd& norms,
                                              const Eigen::VectorXd& densities) {
  if (norms.size() != densities.size()) {
    throw Error(ErrorCode::Dimension, "norms and densities disagree in length");
  }
  if (norms.size() < 3) {
    throw Error(ErrorCode::InsufficientData, "diagnostic needs at least 3 units");
  }
  const auto n = static_cast<double>(norms.size());
  const Eigen::VectorXd x = densities.array() - densities.mean();
  const Eigen::VectorXd y = norms.array() - norms.mean();
  const double sxx = x.squaredNorm();
  const double syy = y.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorCode::DegenerateDiagnostic,
                "norms or densities have zero variance");
  }
  const double sxy = x.dot(y);
  NormDensityDiagnostic d;
  d.n = static_cast<std::size_t>(norms.size());
  d.correlation = sxy / std::sqrt(sxx * syy);
  d.slope = sxy / sxx;
  d.intercept = norms.mean() - d.slope * densities.mean();
  const double rss = (y - d.slope * x).squaredNorm();
  d.r_squared = 1.0 - rss / syy;
  d.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  return d;
}

nlohmann::json ranking_to_json(const DominanceRanking& ranking) {
  nlohmann::json ratios = nlohmann::json::array();
  for (double r : ranking.growth_ratios) {
    if (std::isfinite(r)) {
      ratios.push_back(r);
    } else if (std::isinf(r)) {
      ratios.push_back("inf");
    } else {
      ratios.push_back(nullptr);
    }
  }
  return {
      {"schema_version", kSchemaVersion},
      {"units", ranking.ordered_units},
      {"norms", std::vector<double>(ranking.norms.data(),
                                    ranking.norms.data() + ranking.norms.size())},
      {"ratios", ratios},
      {"k", ranking.k},
      {"dominant", std::vector<std::string>(ranking.ordered_units.begin(),
                                            ranking.ordered_units.begin() +
                                                static_cast<std::ptrdiff_t>(ranking.k))},
  };
}

std::string ranking_to_csv(const DominanceRanking& ranking) {
  std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  out += "rank,unit,norm,growth_ratio,dominant\n";
  for (std::size_t r = 0; r < ranking.ordered_units.size(); ++r) {
    out += std::to_string(r + 1) + "," + csv_escape(ranking.ordered_units[r]) + "," +
           format_double(ranking.norms(static_cast<Eigen::Index>(r))) + ",";
    if (r < ranking.growth_ratios.size() && !std::isnan(ranking.growth_ratios[r])) {
      out += format_double(ranking.growth_ratios[r]);
    }
    out += r < ranking.k ? ",1\n" : ",0\n";
  }
  return out;
}

std::string edges_to_csv(const std::vector<Edge>& edges) {
  std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  out += "source,target,weight\n";
  for (const auto& e : edges) {
    out += csv_escape(e.source) + "," + csv_escape(e.target) + "," +
           format_double(e.weight) + "\n";
  }
  return out;
}

nlohmann::json diagnostic_to_json(const NormDensityDiagnostic& d) {
  return {
      {"schema_version", kSchemaVersion},
      {"n", d.n},
      {"correlation", d.correlation},
      {"slope", d.slope},
      {"intercept", d.intercept},
      {"slope_se", d.slope_se},
      {"r_squared", d.r_squared},
  };
}

}  // namespace dominet
