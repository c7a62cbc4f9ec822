#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "dominet/panel.hpp"
#include "dominet/preprocess.hpp"

namespace dominet {

struct SynthPanelSpec {
  std::size_t n_units = 30;
  /// Number of level observations; the pipeline sees n_periods - 1 differences.
  std::size_t n_periods = 200;
  std::size_t n_dominant = 1;
  double loading_low = 0.8;
  double loading_high = 1.2;
  double spatial_rho = 0.3;
  double noise_sd = 0.5;
  /// Common-factor correlation between dominant innovations.
  double dominant_correlation = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthPanel {
  Panel panel;
  std::vector<std::string> dominant_ids;  // in id order
};

/// Levels are random walks. Dominant innovations are N(0, 1); follower i's
/// innovation is sum_d loading_{i,d} u_d + e_i + rho (e_prev + e_next) / 2
/// over a ring of followers, with e ~ N(0, noise_sd^2).
SynthPanel generate_dominant_panel(const SynthPanelSpec& spec);

struct SynthClassSpec {
  std::size_t n_units = 74;
  std::size_t n_features = 375;
  std::size_t n_informative = 3;
  double effect_size = 1.5;
  /// Share of dominant units; the count is rounded and kept in [1, n_units - 1].
  double class_ratio = 18.0 / 74.0;
  /// Equicorrelated block of noise features; size 0 disables it.
  std::size_t block_size = 0;
  double block_rho = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthClassification {
  FeatureMatrix features;
  std::vector<std::string> informative;  // in column order
  std::vector<std::string> block;
};

/// Every feature is N(0, 1); informative ones add effect_size for dominant units.
SynthClassification generate_classification_data(const SynthClassSpec& spec);

nlohmann::json panel_truth_json(const SynthPanelSpec& spec, const SynthPanel& data);
nlohmann::json classification_truth_json(const SynthClassSpec& spec,
                                         const SynthClassification& data);

}  // namespace dominet
