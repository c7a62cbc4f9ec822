#include "dominet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dominet/csv.hpp"
#include "dominet/error.hpp"
#include "dominet/rng.hpp"

namespace dominet {
namespace {

std::string padded(char prefix, std::size_t i, std::size_t count, int min_width) {
  int digits = 1;
  for (std::size_t n = count > 0 ? count - 1 : 0; n >= 10; n /= 10) ++digits;
  const int width = std::max(digits, min_width);
  std::string digits_str = std::to_string(i);
  if (digits_str.size() < static_cast<std::size_t>(width)) {
    digits_str.insert(0, static_cast<std::size_t>(width) - digits_str.size(), '0');
  }
  return prefix + digits_str;
}

// Civil date for a day count since 1970-01-01 (proleptic Gregorian).
std::string iso_date(long long z) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const long long doe = z - era * 146097;
  const long long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  long long y = yoe + era * 400;
  const long long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const long long mp = (5 * doy + 2) / 153;
  const long long d = doy - (153 * mp + 2) / 5 + 1;
  const long long m = mp < 10 ? mp + 3 : mp - 9;
  if (m <= 2) ++y;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02lld-%02lld", y, m, d);
  return buf;
}

constexpr long long kEpoch2020 = 18262;  // 2020-01-01

std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + uniform_index(rng, n - i)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

void SynthPanelSpec::validate() const {
  if (n_units < 2) throw Error(ErrorCode::Spec, "n_units must be >= 2");
  if (n_periods < 3) throw Error(ErrorCode::Spec, "n_periods must be >= 3");
  if (n_dominant < 1 || n_dominant >= n_units) {
    throw Error(ErrorCode::Spec, "n_dominant must be in [1, n_units)");
  }
  if (!(loading_low <= loading_high)) throw Error(ErrorCode::Spec, "loading range is empty");
  if (!(spatial_rho >= 0.0 && spatial_rho < 1.0)) {
    throw Error(ErrorCode::Spec, "spatial_rho must be in [0, 1)");
  }
  if (!(noise_sd > 0.0)) throw Error(ErrorCode::Spec, "noise_sd must be > 0");
  if (!(dominant_correlation >= 0.0 && dominant_correlation < 1.0)) {
    throw Error(ErrorCode::Spec, "dominant_correlation must be in [0, 1)");
  }
}

SynthPanel generate_dominant_panel(const SynthPanelSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x5041u));
  const std::size_t n = spec.n_units, t_len = spec.n_periods, m = spec.n_dominant;

  const auto dominant = sample_without_replacement(rng, n, m);
  std::vector<bool> is_dominant(n, false);
  for (auto d : dominant) is_dominant[d] = true;
  std::vector<std::size_t> followers;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_dominant[i]) followers.push_back(i);
  }
  const std::size_t nf = followers.size();

  Eigen::MatrixXd loadings(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
    for (Eigen::Index d = 0; d < loadings.cols(); ++d) {
      loadings(i, d) = spec.loading_low + (spec.loading_high - spec.loading_low) * uniform01(rng);
    }
  }

  SynthPanel out;
  Panel& p = out.panel;
  for (std::size_t i = 0; i < n; ++i) p.unit_ids.push_back(padded('u', i, n, 2));
  for (std::size_t t = 0; t < t_len; ++t) {
    p.time_index.push_back(iso_date(kEpoch2020 + static_cast<long long>(t)));
  }
  p.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t_len), static_cast<Eigen::Index>(n));

  const double share = std::sqrt(spec.dominant_correlation);
  const double own = std::sqrt(1.0 - spec.dominant_correlation);
  std::vector<double> u(m), e(nf), shock(n);
  for (std::size_t t = 1; t < t_len; ++t) {
    const double common = standard_normal(rng);
    for (std::size_t d = 0; d < m; ++d) u[d] = share * common + own * standard_normal(rng);
    for (std::size_t f = 0; f < nf; ++f) e[f] = spec.noise_sd * standard_normal(rng);
    for (std::size_t d = 0; d < m; ++d) shock[dominant[d]] = u[d];
    for (std::size_t f = 0; f < nf; ++f) {
      double s = e[f];
      if (nf > 1) {
        const double prev = e[(f + nf - 1) % nf];
        const double next = e[(f + 1) % nf];
        s += spec.spatial_rho * (prev + next) / 2.0;
      }
      for (std::size_t d = 0; d < m; ++d) {
        s += loadings(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(d)) * u[d];
      }
      shock[followers[f]] = s;
    }
    const auto row = static_cast<Eigen::Index>(t);
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      p.values(row, col) = p.values(row - 1, col) + shock[i];
    }
  }
  for (auto d : dominant) out.dominant_ids.push_back(p.unit_ids[d]);
  return out;
}

void SynthClassSpec::validate() const {
  if (n_units < 2) throw Error(ErrorCode::Spec, "n_units must be >= 2");
  if (n_features < 1) throw Error(ErrorCode::Spec, "n_features must be >= 1");
  if (n_informative > n_features) {
    throw Error(ErrorCode::Spec, "n_informative exceeds n_features");
  }
  if (!(class_ratio > 0.0 && class_ratio < 1.0)) {
    throw Error(ErrorCode::Spec, "class_ratio must be in (0, 1)");
  }
  if (!std::isfinite(effect_size)) throw Error(ErrorCode::Spec, "effect_size must be finite");
  if (block_size > n_features - n_informative) {
    throw Error(ErrorCode::Spec, "correlated block larger than the noise features");
  }
  if (block_size == 1) throw Error(ErrorCode::Spec, "correlated block needs size >= 2");
  if (!(block_rho >= 0.0 && block_rho < 1.0)) {
    throw Error(ErrorCode::Spec, "block_rho must be in [0, 1)");
  }
}

SynthClassification generate_classification_data(const SynthClassSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x434cu));
  const std::size_t m = spec.n_units, p = spec.n_features;
  auto n_dom = static_cast<std::size_t>(std::llround(spec.class_ratio * static_cast<double>(m)));
  n_dom = std::clamp<std::size_t>(n_dom, 1, m - 1);

  const auto dominant = sample_without_replacement(rng, m, n_dom);
  std::vector<Label> labels(m, Label::Follower);
  for (auto i : dominant) labels[i] = Label::Dominant;

  const auto informative = sample_without_replacement(rng, p, spec.n_informative);
  std::vector<bool> is_informative(p, false);
  for (auto j : informative) is_informative[j] = true;
  std::vector<std::size_t> noise;
  for (std::size_t j = 0; j < p; ++j) {
    if (!is_informative[j]) noise.push_back(j);
  }
  std::vector<std::size_t> block;
  for (auto k : sample_without_replacement(rng, noise.size(), spec.block_size)) {
    block.push_back(noise[k]);
  }
  std::vector<bool> in_block(p, false);
  for (auto j : block) in_block[j] = true;

  SynthClassification out;
  FeatureMatrix& F = out.features;
  for (std::size_t i = 0; i < m; ++i) F.unit_ids.push_back(padded('r', i, m, 2));
  for (std::size_t j = 0; j < p; ++j) F.feature_names.push_back(padded('f', j, p, 3));
  F.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
  const double share = std::sqrt(spec.block_rho);
  const double own = std::sqrt(1.0 - spec.block_rho);
  for (std::size_t i = 0; i < m; ++i) {
    const double common = standard_normal(rng);
    const double shift = labels[i] == Label::Dominant ? spec.effect_size : 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double v = standard_normal(rng);
      if (in_block[j]) v = share * common + own * v;
      if (is_informative[j]) v += shift;
      F.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  F.labels = std::move(labels);
  for (auto j : informative) out.informative.push_back(F.feature_names[j]);
  for (auto j : block) out.block.push_back(F.feature_names[j]);
  return out;
}

nlohmann::json panel_truth_json(const SynthPanelSpec& spec, const SynthPanel& data) {
  return {
      {"schema_version", kSchemaVersion},
      {"kind", "panel"},
      {"dominant_units", data.dominant_ids},
      {"spec",
       {{"n_units", spec.n_units},
        {"n_periods", spec.n_periods},
        {"n_dominant", spec.n_dominant},
        {"loading_range", {spec.loading_low, spec.loading_high}},
        {"spatial_rho", spec.spatial_rho},
        {"noise_sd", spec.noise_sd},
        {"dominant_correlation", spec.dominant_correlation},
        {"seed", spec.seed}}},
  };
}

nlohmann::json classification_truth_json(const SynthClassSpec& spec,
                                         const SynthClassification& data) {
  return {
      {"schema_version", kSchemaVersion},
      {"kind", "classification"},
      {"informative_features", data.informative},
      {"correlated_block", data.block},
      {"spec",
       {{"n_units", spec.n_units},
        {"n_features", spec.n_features},
        {"n_informative", spec.n_informative},
        {"effect_size", spec.effect_size},
        {"class_ratio", spec.class_ratio},
        {"block_size", spec.block_size},
        {"block_rho", spec.block_rho},
        {"seed", spec.seed}}},
  };
}

}  // namespace dominet
