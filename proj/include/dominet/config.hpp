#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "dominet/forest.hpp"
#include "dominet/lasso.hpp"
#include "dominet/panel.hpp"
#include "dominet/preprocess.hpp"
#include "dominet/synth.hpp"

namespace dominet {

/// Every tunable of the pipelines. Text form is flat `key = value` lines
/// with `#` comments; lists are comma separated.
struct RunConfig {
  LassoConfig lasso;
  LassoMethod lasso_method = LassoMethod::Rigorous;
  InformationCriterion criterion = InformationCriterion::Bic;
  bool norm_diagnostic = false;
  std::vector<std::string> exclude_units;
  MissingPolicy missing = MissingPolicy::DropUnit;

  NzvOptions nzv;
  double correlation_cutoff = 0.85;
  std::vector<std::string> keep_features;

  ForestConfig forest;
  /// Also write the seed run's full forest as a binary dump.
  bool dump_model = false;
  bool tune = false;
  /// Empty means floor(sqrt(p)) scaled by 1/2, 1 and 2.
  std::vector<std::size_t> tune_grid;
  std::size_t tune_folds = 5;
  std::size_t tune_repeats = 5;

  SynthPanelSpec synth_panel;
  SynthClassSpec synth_class;

  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 0;

  /// Propagates `seed` to the forest and the generators.
  void set_seed(std::uint64_t s);
  void validate() const;
};

/// Applies `key = value` lines over `base`. Unknown keys, malformed values
/// and duplicate keys are usage errors naming the line.
RunConfig parse_config(std::string_view text, std::string_view source, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration, echoed into reports.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Default mtry grid for p features.
std::vector<std::size_t> default_tune_grid(std::size_t p);

}  // namespace dominet
